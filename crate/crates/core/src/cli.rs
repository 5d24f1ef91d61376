//! Batch command-line driver.
//!
//! Every subcommand is a pure function of its input files, flags and seed.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hothand::{test_player, PlayerTestResult, SignificanceMethod, SimulationConfig};
use crate::leaguemeta::{binomial_meta_test, build_league_report, ReportConfig, Subset};
use crate::probmodel::{
    align_to_players, predict_loso, probability_lookup, reliability_curve, train, CalibratedModel,
    Hyperparameters,
};
use crate::shotlog::{
    self, filter_complete_games, group_by_player, qualify_players, Feature, Outcome, PlayerDataset, ShotRecord,
};
use crate::synthlab::{self, GeneratorSpec, StudyCell, StudyConfig, SyntheticPlayer, TestKind};

pub const RESULTS_HEADER: &str = "# hothand-results v1";
pub const RESULTS_COLUMNS: &str = "player_id,k,n,observed,sim_mean,e,epsilon,adjusted,p,significant";

#[derive(Debug, Parser)]
#[command(name = "hothand", version, about = "Streakiness tests for heterogeneous binary sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test every qualified player and write per-player results and a league report.
    Analyze(AnalyzeArgs),
    /// Train the logistic shot model and write it with a calibration table.
    TrainModel(TrainArgs),
    /// Write a reliability-curve table for a set of probabilities.
    Calibrate(CalibrateArgs),
    /// Run rejection-rate studies on synthetic players.
    Simulate(SimulateArgs),
    /// Write a synthetic league as a shot log and a probabilities file.
    Generate(GenerateArgs),
    /// Binomial meta-test from counts or from a results file.
    Meta(MetaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Significant,
    All,
}

impl From<SubsetArg> for Subset {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::Significant => Subset::SignificantOnly,
            SubsetArg::All => Subset::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignificanceArg {
    Predictive,
    ReplicateMean,
}

impl From<SignificanceArg> for SignificanceMethod {
    fn from(s: SignificanceArg) -> Self {
        match s {
            SignificanceArg::Predictive => SignificanceMethod::Predictive,
            SignificanceArg::ReplicateMean => SignificanceMethod::ReplicateMean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Heterogeneous,
    Permutation,
}

impl From<TestArg> for TestKind {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Heterogeneous => TestKind::Heterogeneous,
            TestArg::Permutation => TestKind::Permutation,
        }
    }
}

#[derive(Debug, Args)]
pub struct TestFlags {
    /// Streak lengths to test.
    #[arg(long = "k", value_delimiter = ',', default_value = "1,2,3,4")]
    pub k: Vec<usize>,
    /// Replicates per player (at least 2).
    #[arg(long, default_value_t = 100)]
    pub sims: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SignificanceArg::Predictive)]
    pub significance: SignificanceArg,
}

impl TestFlags {
    fn config(&self) -> Result<SimulationConfig> {
        let config = SimulationConfig {
            n_sims: self.sims,
            master_seed: self.seed,
            k_values: self.k.clone(),
            alpha: self.alpha,
            significance: self.significance.into(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

impl ModelFlags {
    fn hyperparameters(&self, seed: u64) -> Hyperparameters {
        Hyperparameters {
            max_epochs: self.epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            l2: self.l2,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Shot log CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Probabilities CSV; without it probabilities come from leave-one-season-out training.
    #[arg(long)]
    pub probs_file: Option<PathBuf>,
    /// Output directory (results.csv, league_report.json, league_table.csv).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub min_shots: usize,
    /// Players averaged in the mean sequence length column.
    #[arg(long, value_enum, default_value_t = SubsetArg::All)]
    pub subset: SubsetArg,
    /// Features every shot of a game must carry (`none` for no requirement).
    /// Defaults to the model features when training, and none with --probs-file.
    #[arg(long, value_delimiter = ',')]
    pub require: Option<Vec<String>>,
    #[command(flatten)]
    pub test: TestFlags,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Model JSON path; the calibration table goes next to it.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Shot log CSV (ignored when --probs-file carries the outcomes).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub probs_file: Option<PathBuf>,
    /// Trained model JSON used to score --input.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: PathBuf,
    /// Synthetic players per grid cell.
    #[arg(long, default_value_t = 200)]
    pub players: usize,
    #[arg(long, default_value_t = 1000)]
    pub shots: usize,
    /// Hot-hand boosts, one grid cell each.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1")]
    pub deltas: Vec<f64>,
    /// Shot-quality shift after a make (negative: harder shots).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub selection_shift: f64,
    /// Bias added to the probabilities the test sees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub model_offset: f64,
    #[arg(long = "test", value_enum, value_delimiter = ',', default_value = "heterogeneous,permutation")]
    pub tests: Vec<TestArg>,
    /// Streak length that triggers the boost and is tested.
    #[arg(long = "k", default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub sims: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SignificanceArg::Predictive)]
    pub significance: SignificanceArg,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Shot log path.
    #[arg(long)]
    pub output: PathBuf,
    /// Probabilities file path (shot log plus the true make probability).
    #[arg(long)]
    pub probs_output: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub players: usize,
    #[arg(long, default_value_t = 1000)]
    pub shots: usize,
    /// Fraction of players given a hot hand.
    #[arg(long, default_value_t = 0.0)]
    pub hot_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub seasons: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    /// Results CSV written by `analyze`.
    #[arg(long, conflicts_with_all = ["tested", "significant"])]
    pub results: Option<PathBuf>,
    /// Number of tests (M).
    #[arg(long, requires = "significant")]
    pub tested: Option<u64>,
    /// Number of significant tests (r).
    #[arg(long, requires = "tested")]
    pub significant: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(&args),
        Command::TrainModel(args) => cmd_train_model(&args),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Meta(args) => {
            let mut stdout = std::io::stdout().lock();
            cmd_meta(&args, &mut stdout)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(contents.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn versioned(kind: &str, body: &str) -> String {
    format!("# hothand-{kind} v1\n{body}")
}

fn parse_required(require: &Option<Vec<String>>, default: &[Feature]) -> Result<Vec<Feature>> {
    match require {
        None => Ok(default.to_vec()),
        Some(list) if list.iter().any(|s| s == "none") => Ok(Vec::new()),
        Some(list) => list.iter().map(|s| s.parse()).collect(),
    }
}

fn prepare_players(records: Vec<ShotRecord>, required: &[Feature], min_shots: usize) -> Result<Vec<PlayerDataset>> {
    let players = group_by_player(records)?
        .into_iter()
        .map(|d| filter_complete_games(d, required))
        .collect();
    Ok(qualify_players(players, min_shots))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-player results table.
pub fn results_table(results: &[PlayerTestResult<f64>]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n{RESULTS_COLUMNS}\n");
    for r in results {
        for (e, significant) in r.estimates.iter().zip(&r.significant) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.player_id,
                e.k,
                e.sample_size,
                e.observed_rate,
                e.sim_mean,
                e.raw_effect,
                e.model_error,
                e.adjusted_effect,
                fmt_opt(e.p_value),
                *significant as u8
            ));
        }
    }
    out
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let config = args.test.config()?;
    if !(args.model.validation_fraction >= 0.0 && args.model.validation_fraction < 1.0) {
        return Err(Error::InvalidArgument("validation fraction must lie in [0, 1)".into()));
    }
    let records = shotlog::parse_shot_log(open(&args.input)?)?;

    let (players, probabilities) = match &args.probs_file {
        Some(path) => {
            let required = parse_required(&args.require, &[])?;
            let players = prepare_players(records, &required, args.min_shots)?;
            let (prob_records, values): (Vec<ShotRecord>, Vec<f64>) =
                shotlog::parse_probability_log(open(path)?)?.into_iter().unzip();
            let lookup = probability_lookup(&prob_records, &values)?;
            let aligned = align_to_players(&players, &lookup)?;
            (players, aligned)
        }
        None => {
            let required = parse_required(&args.require, &Feature::DEFAULT_REQUIRED)?;
            let usable: Vec<PlayerDataset> = prepare_players(records, &required, 0)?;
            let training: Vec<ShotRecord> = usable.iter().flat_map(|d| d.records().cloned()).collect();
            let predicted = predict_loso::<f64>(&training, &args.model.hyperparameters(args.test.seed))?;
            let lookup = probability_lookup(&training, &predicted.values)?;
            let players = qualify_players(usable, args.min_shots);
            let aligned = align_to_players(&players, &lookup)?;
            (players, aligned)
        }
    };

    let results = players
        .par_iter()
        .zip(probabilities.par_iter())
        .map(|(player, probs)| test_player(player, probs, &config))
        .collect::<Result<Vec<_>>>()?;

    let report = build_league_report(
        &results,
        &ReportConfig {
            k_values: config.k_values.clone(),
            alpha: config.alpha,
            length_subset: args.subset.into(),
        },
    )?;
    fs::create_dir_all(&args.output)?;
    write_file(&args.output.join("results.csv"), &results_table(&results))?;
    write_file(&args.output.join("league_report.json"), &report.to_json()?)?;
    write_file(&args.output.join("league_table.csv"), &versioned("league-table", &report.to_table()))?;
    Ok(())
}

fn calibration_path(model_path: &Path) -> PathBuf {
    let mut name = model_path.file_stem().unwrap_or_default().to_os_string();
    name.push(".calibration.csv");
    model_path.with_file_name(name)
}

pub fn cmd_train_model(args: &TrainArgs) -> Result<()> {
    let records = shotlog::parse_shot_log(open(&args.input)?)?;
    let usable = prepare_players(records, &Feature::DEFAULT_REQUIRED, 0)?;
    let training: Vec<ShotRecord> = usable.iter().flat_map(|d| d.records().cloned()).collect();
    let hyper = args.model.hyperparameters(args.seed);
    let model = train::<f64>(&training, &hyper)?;
    write_file(&args.output, &model.to_json()?)?;

    // Out-of-season calibration when possible, in-sample otherwise.
    let predictions = match predict_loso::<f64>(&training, &hyper) {
        Ok(p) => p.values,
        Err(Error::InvalidArgument(_)) => model.predict_all(&training)?,
        Err(e) => return Err(e),
    };
    let outcomes: Vec<_> = training.iter().map(|r| r.outcome).collect();
    let report = reliability_curve(&predictions, &outcomes, args.bins)?;
    let mut table = versioned("calibration", &report.to_table());
    table.push_str(&format!("# accuracy,{}\n", report.accuracy));
    write_file(&calibration_path(&args.output), &table)
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let (predictions, outcomes): (Vec<f64>, Vec<Outcome>) = match (&args.probs_file, &args.model, &args.input) {
        (Some(path), _, _) => {
            let rows = shotlog::parse_probability_log(open(path)?)?;
            let outcomes = rows.iter().map(|(r, _)| r.outcome).collect();
            (rows.into_iter().map(|(_, p)| p).collect::<Vec<f64>>(), outcomes)
        }
        (None, Some(model_path), Some(input)) => {
            let model = CalibratedModel::<f64>::from_json(&fs::read_to_string(model_path)?)?;
            let records = shotlog::parse_shot_log(open(input)?)?;
            let usable = prepare_players(records, &Feature::DEFAULT_REQUIRED, 0)?;
            let records: Vec<&ShotRecord> = usable.iter().flat_map(|d| d.records()).collect();
            let predictions = model.predict_all(records.iter().copied())?;
            (predictions, records.iter().map(|r| r.outcome).collect())
        }
        _ => {
            return Err(Error::InvalidArgument(
                "calibrate needs --probs-file, or --model together with --input".into(),
            ))
        }
    };
    let report = reliability_curve(&predictions, &outcomes, args.bins)?;
    let mut table = versioned("calibration", &report.to_table());
    table.push_str(&format!("# accuracy,{}\n", report.accuracy));
    write_file(&args.output, &table)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cells: Vec<StudyCell> = args
        .deltas
        .iter()
        .map(|&delta| {
            let mut generator = GeneratorSpec::heterogeneous("sim", args.shots, args.seed);
            if delta != 0.0 {
                generator = generator.with_hot_hand(delta, args.k);
            }
            if args.selection_shift != 0.0 {
                generator = generator.with_shot_selection(args.selection_shift, args.k);
            }
            StudyCell {
                label: format!("delta={delta}"),
                generator,
                model_offset: args.model_offset,
            }
        })
        .collect();
    let tests: Vec<TestKind> = args.tests.iter().map(|&t| t.into()).collect();
    let config = StudyConfig {
        n_players: args.players,
        k: args.k,
        sim: SimulationConfig {
            n_sims: args.sims,
            master_seed: args.seed,
            k_values: vec![args.k],
            alpha: args.alpha,
            significance: args.significance.into(),
        },
    };
    let results = synthlab::power_study(&cells, &tests, &config)?;
    write_file(&args.output, &versioned("study", &synthlab::study_table(&results)))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.hot_fraction) {
        return Err(Error::InvalidArgument("hot fraction must lie in [0, 1]".into()));
    }
    let n_hot = (args.players as f64 * args.hot_fraction).round() as usize;
    let players = (0..args.players)
        .into_par_iter()
        .map(|i| {
            let mut spec = GeneratorSpec::heterogeneous(format!("P{i:04}"), args.shots, args.seed);
            spec.n_seasons = args.seasons.max(1);
            if i < n_hot {
                spec = spec.with_hot_hand(args.delta, 1);
            }
            synthlab::gen_sequences(&spec)
        })
        .collect::<Result<Vec<SyntheticPlayer>>>()?;
    let records: Vec<ShotRecord> = players.iter().flat_map(|p| p.dataset.records().cloned()).collect();
    let mut buffer = Vec::new();
    shotlog::write_shot_log(&records, None, &mut buffer)?;
    write_file(&args.output, &String::from_utf8_lossy(&buffer))?;
    if let Some(path) = &args.probs_output {
        let mut buffer = Vec::new();
        synthlab::write_probability_log(&players, &mut buffer)?;
        write_file(path, &String::from_utf8_lossy(&buffer))?;
    }
    Ok(())
}

/// Reads `(k, significant)` pairs from a results file.
pub fn read_results(path: &Path) -> Result<Vec<(usize, bool)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("results file lacks column `{name}`")))
    };
    let (k_col, sig_col) = (column("k")?, column("significant")?);
    reader
        .records()
        .map(|row| {
            let row = row?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let bad = |col: &str| Error::Parse {
                line,
                column: col.to_string(),
                message: "invalid value".into(),
            };
            let k = row.get(k_col).and_then(|v| v.parse().ok()).ok_or_else(|| bad("k"))?;
            let significant = match row.get(sig_col) {
                Some("1") => true,
                Some("0") => false,
                _ => return Err(bad("significant")),
            };
            Ok((k, significant))
        })
        .collect()
}

pub fn cmd_meta<W: Write>(args: &MetaArgs, out: &mut W) -> Result<()> {
    match (&args.results, args.tested, args.significant) {
        (None, Some(m), Some(r)) => {
            let p = binomial_meta_test(m, r, args.alpha)?;
            writeln!(out, "tested,significant,alpha,meta_p")?;
            writeln!(out, "{m},{r},{},{p:e}", args.alpha)?;
        }
        (Some(path), None, None) => {
            let rows = read_results(path)?;
            let mut ks: Vec<usize> = rows.iter().map(|(k, _)| *k).collect();
            ks.sort_unstable();
            ks.dedup();
            writeln!(out, "k,tested,significant,alpha,meta_p")?;
            for k in ks {
                let m = rows.iter().filter(|(kk, _)| *kk == k).count() as u64;
                let r = rows.iter().filter(|(kk, s)| *kk == k && *s).count() as u64;
                let p = binomial_meta_test(m, r, args.alpha)?;
                writeln!(out, "{k},{m},{r},{},{p:e}", args.alpha)?;
            }
        }
        _ => {
            return Err(Error::InvalidArgument(
                "meta needs either --results or both --tested and --significant".into(),
            ))
        }
    }
    Ok(())
}
