//! Synthetic shooters, exact enumeration oracles and rejection-rate studies.
//!
//! A synthetic player's shots are independent Bernoulli draws from per-shot
//! probabilities, optionally modified after a streak of makes:
//!
//! - a *hot hand* adds `delta` to the make probability without changing the
//!   reported shot quality, so only a genuine streak effect is injected;
//! - *shot selection* shifts the shot quality itself (e.g. harder shots after
//!   makes). The shifted quality is what a shot-quality model would see.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hothand::{permutation_test, test_player, SimulationConfig};
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;
use crate::shotlog::{self, GameSequence, Outcome, PlayerDataset, ShotRecord};
use crate::streakstats::StreakCounts;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbabilityLaw {
    Constant(f64),
    /// Each shot's quality drawn independently from `U(low, high)`.
    Uniform { low: f64, high: f64 },
}

/// Additive make-probability boost after `k_trigger` consecutive makes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotHand {
    pub delta: f64,
    pub k_trigger: usize,
}

/// Additive shot-quality shift after `k_trigger` consecutive makes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSelection {
    pub shift: f64,
    pub k_trigger: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub player_id: String,
    pub n_games: usize,
    pub shots_per_game: usize,
    pub law: ProbabilityLaw,
    pub hot_hand: Option<HotHand>,
    pub shot_selection: Option<ShotSelection>,
    /// Games are split into this many consecutive seasons.
    pub n_seasons: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// `n_shots` shots in games of 20 with heterogeneous quality `U(0.3, 0.7)`.
    pub fn heterogeneous(player_id: impl Into<String>, n_shots: usize, seed: u64) -> Self {
        let shots_per_game = 20.min(n_shots.max(1));
        GeneratorSpec {
            player_id: player_id.into(),
            n_games: n_shots.div_ceil(shots_per_game),
            shots_per_game,
            law: ProbabilityLaw::Uniform { low: 0.3, high: 0.7 },
            hot_hand: None,
            shot_selection: None,
            n_seasons: 1,
            seed,
        }
    }

    pub fn with_hot_hand(mut self, delta: f64, k_trigger: usize) -> Self {
        self.hot_hand = Some(HotHand { delta, k_trigger });
        self
    }

    pub fn with_shot_selection(mut self, shift: f64, k_trigger: usize) -> Self {
        self.shot_selection = Some(ShotSelection { shift, k_trigger });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_games == 0 || self.shots_per_game == 0 || self.n_seasons == 0 {
            return Err(Error::InvalidArgument(
                "generator needs at least one game, shot and season".into(),
            ));
        }
        match self.law {
            ProbabilityLaw::Constant(p) if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidArgument(format!("constant probability {p} outside [0, 1]")))
            }
            ProbabilityLaw::Uniform { low, high } if !(0.0 <= low && low <= high && high <= 1.0) => {
                Err(Error::InvalidArgument(format!("uniform law [{low}, {high}] invalid")))
            }
            _ => Ok(()),
        }
    }
}

/// Generated player with the shot quality a model would report.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPlayer {
    pub dataset: PlayerDataset,
    /// Per-shot quality in dataset order (excludes any hot-hand boost).
    pub probabilities: Vec<f64>,
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

fn streak_active(run: usize, k_trigger: usize) -> bool {
    k_trigger > 0 && run >= k_trigger
}

pub fn gen_sequences(spec: &GeneratorSpec) -> Result<SyntheticPlayer> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &spec.player_id, Purpose::Generator, 0);
    let mut games = Vec::with_capacity(spec.n_games);
    let mut probabilities = Vec::with_capacity(spec.n_games * spec.shots_per_game);
    for g in 0..spec.n_games {
        let season = (2013 + g * spec.n_seasons / spec.n_games).to_string();
        let game_id = format!("G{g:05}");
        let mut run = 0usize;
        let mut records = Vec::with_capacity(spec.shots_per_game);
        for order in 0..spec.shots_per_game {
            let base = match spec.law {
                ProbabilityLaw::Constant(p) => p,
                ProbabilityLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            };
            let quality = match spec.shot_selection {
                Some(s) if streak_active(run, s.k_trigger) => (base + s.shift).clamp(0.0, 1.0),
                _ => base,
            };
            let effective = match spec.hot_hand {
                Some(h) if streak_active(run, h.k_trigger) => (quality + h.delta).clamp(0.0, 1.0),
                _ => quality,
            };
            let outcome = Outcome::from(rng.random::<f64>() < effective);
            run = if outcome.is_make() { run + 1 } else { 0 };

            // Distance carries the quality signal (logit p = 2 − 0.1·distance);
            // the remaining features are noise.
            let record = ShotRecord {
                dist_basket: Some(((2.0 - logit(quality)) / 0.1).max(0.0)),
                defender_dist: Some(8.0 * rng.random::<f64>()),
                touch_time: Some(6.0 * rng.random::<f64>()),
                dribbles: Some(rng.random_range(0..7)),
                shot_type: Some(if rng.random_bool(0.5) { "jump" } else { "pullup" }.to_string()),
                defender_id: Some(format!("D{}", rng.random_range(0..10))),
                ..ShotRecord::bare(season.clone(), game_id.clone(), spec.player_id.clone(), order as u32, outcome)
            };
            records.push(record);
            probabilities.push(quality);
        }
        games.push(GameSequence::from_records(records)?);
    }
    Ok(SyntheticPlayer {
        dataset: PlayerDataset::new(spec.player_id.clone(), games),
        probabilities,
    })
}

/// Writes players in the probabilities-file schema (shot log plus `p`).
pub fn write_probability_log<W: Write>(players: &[SyntheticPlayer], sink: W) -> Result<()> {
    let records: Vec<ShotRecord> = players
        .iter()
        .flat_map(|p| p.dataset.records().cloned())
        .collect();
    let probabilities: Vec<f64> = players.iter().flat_map(|p| p.probabilities.iter().copied()).collect();
    shotlog::write_shot_log(&records, Some(&probabilities), sink)
}

/// Exact mean of the within-sequence make rate after `k` makes, averaged
/// uniformly over all arrangements of `n_makes` makes in `n` shots.
/// Arrangements without any eligible shot are excluded.
pub fn bias_oracle<T: Scalar>(n: usize, n_makes: usize, k: usize) -> Result<T> {
    if n > 20 {
        return Err(Error::InvalidArgument(format!(
            "enumeration over {n} shots is infeasible (limit 20)"
        )));
    }
    if n_makes == 0 || n_makes >= n {
        return Err(Error::InvalidArgument(format!(
            "need 0 < makes < shots, got {n_makes} of {n}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("streak length k must be at least 1".into()));
    }
    // (eligible, makes) -> number of arrangements
    let mut histogram: HashMap<(u64, u64), u64> = HashMap::new();
    let mut mask: u32 = (1u32 << n_makes) - 1;
    let limit = 1u32 << n;
    while mask < limit {
        let mut counts = StreakCounts::new(k);
        counts.add_game((0..n).map(|i| Outcome::from(mask >> i & 1 == 1)));
        *histogram
            .entry((counts.eligible[k - 1], counts.makes[k - 1]))
            .or_default() += 1;
        // next combination with the same popcount
        let low = mask & mask.wrapping_neg();
        let ripple = mask + low;
        mask = (((ripple ^ mask) >> 2) / low) | ripple;
    }
    let mut entries: Vec<_> = histogram.into_iter().filter(|((e, _), _)| *e > 0).collect();
    entries.sort_unstable();
    let defined: u64 = entries.iter().map(|(_, c)| c).sum();
    if defined == 0 {
        return Err(Error::UndefinedSample("no arrangement has a streak of length k".into()));
    }
    let total = entries.iter().fold(T::zero(), |acc, ((eligible, makes), count)| {
        acc + T::from_ratio(*makes, *eligible) * T::from_u64(*count)
    });
    Ok(total / T::from_u64(defined))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    /// Heterogeneous-Bernoulli test with model-error adjustment.
    Heterogeneous,
    /// Quality-blind within-game permutation test.
    Permutation,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestKind::Heterogeneous => "heterogeneous",
            TestKind::Permutation => "permutation",
        })
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heterogeneous" | "hetero" => Ok(TestKind::Heterogeneous),
            "permutation" | "perm" => Ok(TestKind::Permutation),
            other => Err(Error::InvalidArgument(format!("unknown test `{other}`"))),
        }
    }
}

/// One grid cell: a generator template plus the probability model's bias.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub label: String,
    /// Template; the player id is replaced per synthetic player.
    pub generator: GeneratorSpec,
    /// Added to every reported probability before testing (then clamped).
    pub model_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n_players: usize,
    /// Streak length whose significance counts as a rejection.
    pub k: usize,
    pub sim: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub label: String,
    pub test: TestKind,
    pub n_players: usize,
    /// Players with a non-empty conditional sample for `k`.
    pub n_tested: usize,
    pub rejections: usize,
    /// Rejections over all synthetic players.
    pub rejection_rate: f64,
    /// Mean raw effect over tested players (observed minus null expectation).
    pub mean_raw_effect: f64,
    /// Mean adjusted effect over tested players; equals the raw effect for the
    /// permutation test.
    pub mean_adjusted_effect: f64,
}

struct PlayerVerdict {
    tested: bool,
    rejected: bool,
    raw_effect: f64,
    adjusted_effect: f64,
}

fn judge_player(cell: &StudyCell, index: usize, test: TestKind, config: &StudyConfig) -> Result<PlayerVerdict> {
    let spec = GeneratorSpec {
        player_id: format!("{}-{index:05}", cell.label),
        ..cell.generator.clone()
    };
    let player = gen_sequences(&spec)?;
    let untested = PlayerVerdict {
        tested: false,
        rejected: false,
        raw_effect: 0.0,
        adjusted_effect: 0.0,
    };
    match test {
        TestKind::Heterogeneous => {
            let probabilities: Vec<f64> = player
                .probabilities
                .iter()
                .map(|p| (p + cell.model_offset).clamp(0.0, 1.0))
                .collect();
            let sim = SimulationConfig {
                k_values: vec![config.k],
                ..config.sim.clone()
            };
            let result = test_player(&player.dataset, &probabilities, &sim)?;
            Ok(match result.estimate(config.k) {
                Some(e) => PlayerVerdict {
                    tested: true,
                    rejected: e.is_significant(sim.alpha),
                    raw_effect: e.raw_effect,
                    adjusted_effect: e.adjusted_effect,
                },
                None => untested,
            })
        }
        TestKind::Permutation => {
            match permutation_test::<f64>(&player.dataset.games, config.k, config.sim.n_sims, config.sim.master_seed) {
                Ok(result) => {
                    let effect = result.observed - result.perm_mean().unwrap_or(result.observed);
                    Ok(PlayerVerdict {
                        tested: true,
                        rejected: result.p_value < config.sim.alpha,
                        raw_effect: effect,
                        adjusted_effect: effect,
                    })
                }
                Err(Error::UndefinedSample(_)) | Err(Error::InsufficientData(_)) => Ok(untested),
                Err(e) => Err(e),
            }
        }
    }
}

/// Rejection rate of each test in each cell over `n_players` synthetic
/// players. Players are generated and tested in parallel; results do not
/// depend on the thread count.
pub fn power_study(cells: &[StudyCell], tests: &[TestKind], config: &StudyConfig) -> Result<Vec<CellResult>> {
    config.sim.validate()?;
    if config.n_players == 0 || config.k == 0 {
        return Err(Error::InvalidArgument("a study needs players and k ≥ 1".into()));
    }
    let mut out = Vec::with_capacity(cells.len() * tests.len());
    for cell in cells {
        cell.generator.validate()?;
        for &test in tests {
            let verdicts = (0..config.n_players)
                .into_par_iter()
                .map(|i| judge_player(cell, i, test, config))
                .collect::<Result<Vec<_>>>()?;
            let tested: Vec<&PlayerVerdict> = verdicts.iter().filter(|v| v.tested).collect();
            let rejections = tested.iter().filter(|v| v.rejected).count();
            let n_tested = tested.len();
            let avg = |f: fn(&PlayerVerdict) -> f64| {
                if n_tested == 0 {
                    f64::NAN
                } else {
                    tested.iter().map(|v| f(v)).sum::<f64>() / n_tested as f64
                }
            };
            out.push(CellResult {
                label: cell.label.clone(),
                test,
                n_players: config.n_players,
                n_tested,
                rejections,
                rejection_rate: rejections as f64 / config.n_players as f64,
                mean_raw_effect: avg(|v| v.raw_effect),
                mean_adjusted_effect: avg(|v| v.adjusted_effect),
            });
        }
    }
    Ok(out)
}

/// Renders study results as a delimited table.
pub fn study_table(results: &[CellResult]) -> String {
    let mut out = String::from(
        "cell,test,players,tested,rejections,rejection_rate,mean_raw_effect,mean_adjusted_effect\n",
    );
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label, r.test, r.n_players, r.n_tested, r.rejections, r.rejection_rate, r.mean_raw_effect, r.mean_adjusted_effect
        ));
    }
    out
}
