//! Shot-log ingestion: parsing, grouping into per-game sequences, filtering of
//! incomplete games and player qualification.
//!
//! The on-disk format is a comma-delimited table with the header
//! `season,game_id,player_id,order_in_game,outcome,dist_basket,defender_dist,touch_time,dribbles,shot_type,defender_id`.
//! A probabilities file carries the same columns followed by `p`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SHOT_LOG_COLUMNS: [&str; 11] = [
    "season",
    "game_id",
    "player_id",
    "order_in_game",
    "outcome",
    "dist_basket",
    "defender_dist",
    "touch_time",
    "dribbles",
    "shot_type",
    "defender_id",
];

pub const PROBABILITY_COLUMN: &str = "p";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Outcome {
    Miss = 0,
    Make = 1,
}

impl Outcome {
    pub fn is_make(self) -> bool {
        self == Outcome::Make
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Make => Outcome::Miss,
            Outcome::Miss => Outcome::Make,
        }
    }

    /// Parses a compact `M`/`X` string, ignoring whitespace and commas.
    pub fn parse_sequence(text: &str) -> Option<Vec<Outcome>> {
        text.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                'M' | 'm' => Some(Outcome::Make),
                'X' | 'x' => Some(Outcome::Miss),
                _ => None,
            })
            .collect()
    }
}

impl From<bool> for Outcome {
    fn from(make: bool) -> Self {
        if make {
            Outcome::Make
        } else {
            Outcome::Miss
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Make => "M",
            Outcome::Miss => "X",
        })
    }
}

/// Optional shot features that can be required for a game to be usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    DistBasket,
    DefenderDist,
    TouchTime,
    Dribbles,
    ShotType,
    DefenderId,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::DistBasket,
        Feature::DefenderDist,
        Feature::TouchTime,
        Feature::Dribbles,
        Feature::ShotType,
        Feature::DefenderId,
    ];

    /// Features a game must carry on every shot to enter the probability model.
    pub const DEFAULT_REQUIRED: [Feature; 5] = [
        Feature::DistBasket,
        Feature::DefenderDist,
        Feature::TouchTime,
        Feature::Dribbles,
        Feature::ShotType,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Feature::DistBasket => "dist_basket",
            Feature::DefenderDist => "defender_dist",
            Feature::TouchTime => "touch_time",
            Feature::Dribbles => "dribbles",
            Feature::ShotType => "shot_type",
            Feature::DefenderId => "defender_id",
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.column() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{s}`")))
    }
}

/// One shot attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub season: String,
    pub game_id: String,
    pub player_id: String,
    pub order_in_game: u32,
    pub outcome: Outcome,
    /// Feet.
    pub dist_basket: Option<f64>,
    /// Feet.
    pub defender_dist: Option<f64>,
    /// Seconds.
    pub touch_time: Option<f64>,
    pub dribbles: Option<u32>,
    pub shot_type: Option<String>,
    pub defender_id: Option<String>,
}

impl ShotRecord {
    /// A record carrying identifiers and outcome only.
    pub fn bare(
        season: impl Into<String>,
        game_id: impl Into<String>,
        player_id: impl Into<String>,
        order_in_game: u32,
        outcome: Outcome,
    ) -> Self {
        ShotRecord {
            season: season.into(),
            game_id: game_id.into(),
            player_id: player_id.into(),
            order_in_game,
            outcome,
            dist_basket: None,
            defender_dist: None,
            touch_time: None,
            dribbles: None,
            shot_type: None,
            defender_id: None,
        }
    }

    pub fn has_feature(&self, feature: Feature) -> bool {
        match feature {
            Feature::DistBasket => self.dist_basket.is_some(),
            Feature::DefenderDist => self.defender_dist.is_some(),
            Feature::TouchTime => self.touch_time.is_some(),
            Feature::Dribbles => self.dribbles.is_some(),
            Feature::ShotType => self.shot_type.is_some(),
            Feature::DefenderId => self.defender_id.is_some(),
        }
    }

    /// Identity of the shot across files: `(player_id, game_id, order_in_game)`.
    pub fn key(&self) -> ShotKey {
        ShotKey {
            player_id: self.player_id.clone(),
            game_id: self.game_id.clone(),
            order: self.order_in_game,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShotKey {
    pub player_id: String,
    pub game_id: String,
    pub order: u32,
}

/// All shots of one player in one game, ordered by `order_in_game`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSequence {
    pub player_id: String,
    pub game_id: String,
    pub outcomes: Vec<Outcome>,
    pub records: Vec<ShotRecord>,
}

impl GameSequence {
    /// Builds a sequence from the records of a single (player, game) pair.
    pub fn from_records(mut records: Vec<ShotRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Validation("a game needs at least one shot".into()))?;
        let (player_id, game_id) = (first.player_id.clone(), first.game_id.clone());
        if let Some(stray) = records
            .iter()
            .find(|r| r.player_id != player_id || r.game_id != game_id)
        {
            return Err(Error::Validation(format!(
                "shot ({}, {}) does not belong to game ({player_id}, {game_id})",
                stray.player_id, stray.game_id
            )));
        }
        records.sort_by_key(|r| r.order_in_game);
        if let Some(pair) = records
            .windows(2)
            .find(|w| w[0].order_in_game == w[1].order_in_game)
        {
            return Err(Error::Validation(format!(
                "duplicate shot (player {player_id}, game {game_id}, order {})",
                pair[0].order_in_game
            )));
        }
        let outcomes = records.iter().map(|r| r.outcome).collect();
        Ok(GameSequence {
            player_id,
            game_id,
            outcomes,
            records,
        })
    }

    /// Builds a feature-less game from bare outcomes (orders `0..n`).
    pub fn from_outcomes(
        player_id: impl Into<String>,
        game_id: impl Into<String>,
        outcomes: &[Outcome],
    ) -> Self {
        let player_id = player_id.into();
        let game_id = game_id.into();
        let records = outcomes
            .iter()
            .enumerate()
            .map(|(i, &o)| ShotRecord::bare("", game_id.clone(), player_id.clone(), i as u32, o))
            .collect();
        GameSequence {
            player_id,
            game_id,
            outcomes: outcomes.to_vec(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn makes(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_make()).count()
    }
}

/// All usable games of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerDataset {
    pub player_id: String,
    pub games: Vec<GameSequence>,
    pub total_shots: usize,
}

impl PlayerDataset {
    pub fn new(player_id: impl Into<String>, games: Vec<GameSequence>) -> Self {
        let total_shots = games.iter().map(GameSequence::len).sum();
        PlayerDataset {
            player_id: player_id.into(),
            games,
            total_shots,
        }
    }

    /// Records in dataset order (games in order, shots in game order).
    pub fn records(&self) -> impl Iterator<Item = &ShotRecord> {
        self.games.iter().flat_map(|g| g.records.iter())
    }
}

fn parse_err(line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn opt_cell<T: FromStr>(cell: &str, line: u64, column: &str) -> Result<Option<T>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| parse_err(line, column, format!("cannot parse `{cell}`")))
}

fn opt_nonneg(cell: &str, line: u64, column: &str) -> Result<Option<f64>> {
    match opt_cell::<f64>(cell, line, column)? {
        Some(v) if !v.is_finite() || v < 0.0 => Err(parse_err(
            line,
            column,
            format!("expected a finite non-negative number, got `{}`", cell.trim()),
        )),
        other => Ok(other),
    }
}

fn required_cell<'a>(cell: &'a str, line: u64, column: &str) -> Result<&'a str> {
    let cell = cell.trim();
    if cell.is_empty() {
        Err(parse_err(line, column, "required cell is empty"))
    } else {
        Ok(cell)
    }
}

struct RawRow {
    record: ShotRecord,
    explicit_order: bool,
    p: Option<f64>,
}

fn parse_rows<R: Read>(source: R, with_probability: bool) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut expected: Vec<&str> = SHOT_LOG_COLUMNS.to_vec();
    if with_probability {
        expected.push(PROBABILITY_COLUMN);
    }
    let actual: Vec<&str> = headers.iter().map(str::trim).collect();
    if actual != expected {
        return Err(parse_err(
            1,
            "header",
            format!("expected columns `{}`, found `{}`", expected.join(","), actual.join(",")),
        ));
    }

    let mut rows = Vec::new();
    for result in reader.records() {
        let row = result?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != expected.len() {
            return Err(parse_err(
                line,
                "row",
                format!("expected {} cells, found {}", expected.len(), row.len()),
            ));
        }
        let cell = |i: usize| row.get(i).unwrap_or("");
        let outcome = match required_cell(cell(4), line, "outcome")? {
            "1" => Outcome::Make,
            "0" => Outcome::Miss,
            other => {
                return Err(Error::Validation(format!(
                    "line {line}, column `outcome`: outcome must be 0 or 1, got `{other}`"
                )))
            }
        };
        let order: Option<u32> = opt_cell(cell(3), line, "order_in_game")?;
        let record = ShotRecord {
            season: required_cell(cell(0), line, "season")?.to_string(),
            game_id: required_cell(cell(1), line, "game_id")?.to_string(),
            player_id: required_cell(cell(2), line, "player_id")?.to_string(),
            order_in_game: order.unwrap_or(0),
            outcome,
            dist_basket: opt_nonneg(cell(5), line, "dist_basket")?,
            defender_dist: opt_nonneg(cell(6), line, "defender_dist")?,
            touch_time: opt_nonneg(cell(7), line, "touch_time")?,
            dribbles: opt_cell(cell(8), line, "dribbles")?,
            shot_type: Some(cell(9).trim()).filter(|s| !s.is_empty()).map(String::from),
            defender_id: Some(cell(10).trim()).filter(|s| !s.is_empty()).map(String::from),
        };
        let p = if with_probability {
            let p: f64 = required_cell(cell(11), line, PROBABILITY_COLUMN)?
                .parse()
                .map_err(|_| parse_err(line, PROBABILITY_COLUMN, "cannot parse probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(parse_err(line, PROBABILITY_COLUMN, format!("probability {p} outside [0, 1]")));
            }
            Some(p)
        } else {
            None
        };
        rows.push(RawRow {
            record,
            explicit_order: order.is_some(),
            p,
        });
    }

    // Rows without an explicit order take their position among the rows of the
    // same (player, game) pair.
    let mut position: HashMap<(String, String), u32> = HashMap::new();
    for row in &mut rows {
        let slot = position
            .entry((row.record.player_id.clone(), row.record.game_id.clone()))
            .or_insert(0);
        if !row.explicit_order {
            row.record.order_in_game = *slot;
        }
        *slot += 1;
    }

    let mut seen = HashSet::new();
    for row in &rows {
        if !seen.insert(row.record.key()) {
            return Err(Error::Validation(format!(
                "duplicate shot (player {}, game {}, order {})",
                row.record.player_id, row.record.game_id, row.record.order_in_game
            )));
        }
    }
    Ok(rows)
}

/// Parses a shot log, one record per data row, in row order.
pub fn parse_shot_log<R: Read>(source: R) -> Result<Vec<ShotRecord>> {
    Ok(parse_rows(source, false)?.into_iter().map(|r| r.record).collect())
}

/// Parses a probabilities file (shot-log columns plus `p`).
pub fn parse_probability_log<R: Read>(source: R) -> Result<Vec<(ShotRecord, f64)>> {
    Ok(parse_rows(source, true)?
        .into_iter()
        .map(|r| (r.record, r.p.unwrap_or_default()))
        .collect())
}

fn fmt_opt<T: ToString>(value: &Option<T>) -> String {
    value.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn record_cells(r: &ShotRecord) -> Vec<String> {
    vec![
        r.season.clone(),
        r.game_id.clone(),
        r.player_id.clone(),
        r.order_in_game.to_string(),
        (r.outcome as u8).to_string(),
        fmt_opt(&r.dist_basket),
        fmt_opt(&r.defender_dist),
        fmt_opt(&r.touch_time),
        fmt_opt(&r.dribbles),
        fmt_opt(&r.shot_type),
        fmt_opt(&r.defender_id),
    ]
}

/// Writes records in the shot-log schema. When `probabilities` is given the
/// output is a probabilities file.
pub fn write_shot_log<W: Write>(
    records: &[ShotRecord],
    probabilities: Option<&[f64]>,
    sink: W,
) -> Result<()> {
    if let Some(p) = probabilities {
        if p.len() != records.len() {
            return Err(Error::LengthMismatch {
                expected: records.len(),
                actual: p.len(),
            });
        }
    }
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    let mut header: Vec<&str> = SHOT_LOG_COLUMNS.to_vec();
    if probabilities.is_some() {
        header.push(PROBABILITY_COLUMN);
    }
    writer.write_record(&header)?;
    for (i, record) in records.iter().enumerate() {
        let mut cells = record_cells(record);
        if let Some(p) = probabilities {
            cells.push(p[i].to_string());
        }
        writer.write_record(&cells)?;
    }
    writer.flush()?;
    Ok(())
}

/// Groups records into per-player datasets.
///
/// Players are ordered by id and games by game id; shots within a game by
/// `order_in_game`. A game never mixes shots from different `game_id`s.
pub fn group_by_player(records: Vec<ShotRecord>) -> Result<Vec<PlayerDataset>> {
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<ShotRecord>>> = BTreeMap::new();
    for record in records {
        grouped
            .entry(record.player_id.clone())
            .or_default()
            .entry(record.game_id.clone())
            .or_default()
            .push(record);
    }
    grouped
        .into_iter()
        .map(|(player_id, games)| {
            let games = games
                .into_values()
                .map(GameSequence::from_records)
                .collect::<Result<Vec<_>>>()?;
            Ok(PlayerDataset::new(player_id, games))
        })
        .collect()
}

/// Drops every game in which any shot lacks one of `required`.
pub fn filter_complete_games(dataset: PlayerDataset, required: &[Feature]) -> PlayerDataset {
    let games = dataset
        .games
        .into_iter()
        .filter(|g| {
            g.records
                .iter()
                .all(|r| required.iter().all(|&f| r.has_feature(f)))
        })
        .collect();
    PlayerDataset::new(dataset.player_id, games)
}

/// Keeps players with at least `min_shots` shots. Apply after
/// [`filter_complete_games`] so that only usable shots count.
pub fn qualify_players(datasets: Vec<PlayerDataset>, min_shots: usize) -> Vec<PlayerDataset> {
    datasets
        .into_iter()
        .filter(|d| d.total_shots >= min_shots)
        .collect()
}
