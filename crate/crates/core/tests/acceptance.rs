//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hothand::cli::{run, Cli};
use hothand::hothand::{adjusted_effect, SignificanceMethod, SimulationConfig};
use hothand::leaguemeta::{binomial_meta_test, binomial_pmf};
use hothand::probmodel::{loss, loss_and_gradient, predict_loso, reliability_curve, Hyperparameters, Provenance};
use hothand::scalar::exact_decimal;
use hothand::shotlog::{Outcome, ShotRecord};
use hothand::synthlab::{
    bias_oracle, gen_sequences, power_study, write_probability_log, CellResult, GeneratorSpec, StudyCell,
    StudyConfig, TestKind,
};
use hothand::Exact;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn study(generator: GeneratorSpec, model_offset: f64, players: usize, tests: &[TestKind], seed: u64) -> Vec<CellResult> {
    let cell = StudyCell {
        label: format!("s{seed}"),
        generator,
        model_offset,
    };
    let config = StudyConfig {
        n_players: players,
        k: 1,
        sim: SimulationConfig {
            n_sims: 100,
            master_seed: seed,
            k_values: vec![1],
            alpha: 0.05,
            significance: SignificanceMethod::Predictive,
        },
    };
    power_study(&[cell], tests, &config).expect("study runs")
}

fn adjustment_arithmetic() -> Check {
    let rows = [
        ("0.426", "0.387", "0.398", "0.384", "0.025"),
        ("0.471", "0.388", "0.401", "0.385", "0.067"),
        ("0.516", "0.376", "0.410", "0.383", "0.113"),
        ("0.533", "0.388", "0.410", "0.392", "0.127"),
    ];
    let d = |s: &str| exact_decimal(s).expect("decimal literal");
    let mut got = Vec::new();
    for (observed, sim, null_observed, null_sim, want) in rows {
        let e: Exact = d(observed) - d(sim);
        let eps: Exact = d(null_observed) - d(null_sim);
        let adjusted = adjusted_effect(e, eps);
        if adjusted != d(want) {
            return Err(format!("got {adjusted}, want {want}"));
        }
        got.push(want);
    }
    Ok(format!("adjusted effects {} exactly", got.join(", ")))
}

fn meta_test() -> Check {
    let p: f64 = binomial_meta_test(153, 24, 0.05).map_err(|e| e.to_string())?;
    let zero: f64 = binomial_meta_test(153, 0, 0.05).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for n in [1u64, 10, 153, 1000] {
        for r in 1..=n.min(60) {
            let upper: f64 = binomial_meta_test(n, r, 0.05).unwrap();
            let lower: f64 = (0..r).map(|x| binomial_pmf(x, n, 0.05)).sum();
            worst = worst.max((upper + lower - 1.0).abs());
        }
    }
    ensure(
        p < 1e-6 && zero == 1.0 && worst <= 1e-12,
        format!("P(X>=24 | 153, 0.05) = {p:.3e}, r=0 -> {zero}, complement error {worst:.1e}"),
    )
}

fn selection_bias_oracle() -> Check {
    let small: Exact = bias_oracle(4, 2, 1).map_err(|e| e.to_string())?;
    if small != Exact::new(1, 3) {
        return Err(format!("bias_oracle(4, 2, 1) = {small}"));
    }
    let mut cases = 0;
    for n in 3..=12usize {
        for m in 2..n {
            let value: Exact = bias_oracle(n, m, 1).map_err(|e| e.to_string())?;
            if value >= Exact::new(m as i64, n as i64) {
                return Err(format!("bias_oracle({n}, {m}, 1) = {value} is not below {m}/{n}"));
            }
            cases += 1;
        }
    }
    Ok(format!("bias_oracle(4, 2, 1) = 1/3; below m/n in all {cases} cases with n <= 12"))
}

fn null_calibration() -> Check {
    let generator = GeneratorSpec::heterogeneous("null", 1000, 41);
    let r = &study(generator, 0.0, 500, &[TestKind::Heterogeneous], 41)[0];
    ensure(
        (0.027..=0.078).contains(&r.rejection_rate),
        format!("{} of {} rejected (rate {:.3}, band [0.027, 0.078])", r.rejections, r.n_players, r.rejection_rate),
    )
}

fn power() -> Check {
    let generator = GeneratorSpec::heterogeneous("power", 1000, 42).with_hot_hand(0.10, 1);
    let r = &study(generator, 0.0, 200, &[TestKind::Heterogeneous], 42)[0];
    ensure(
        r.rejection_rate > 0.5,
        format!("{} of {} rejected (rate {:.3}) at delta = 0.10", r.rejections, r.n_players, r.rejection_rate),
    )
}

fn underestimation() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [101u64, 202, 303] {
        let generator = GeneratorSpec::heterogeneous("quality", 1000, seed)
            .with_hot_hand(0.10, 1)
            .with_shot_selection(-0.10, 1);
        let results = study(generator, 0.0, 500, &[TestKind::Heterogeneous, TestKind::Permutation], seed);
        let (hetero, perm) = (results[0].rejections, results[1].rejections);
        ok &= perm < hetero;
        lines.push(format!("seed {seed}: permutation {perm} < heterogeneous {hetero}"));
    }
    ensure(ok, lines.join("; "))
}

fn error_adjustment() -> Check {
    let generator = GeneratorSpec::heterogeneous("deflated", 1000, 77);
    let r = &study(generator, -0.05, 200, &[TestKind::Heterogeneous], 77)[0];
    ensure(
        (r.mean_raw_effect - 0.05).abs() <= 0.01 && r.mean_adjusted_effect.abs() <= 0.01,
        format!("mean e = {:+.4}, mean adjusted = {:+.4}", r.mean_raw_effect, r.mean_adjusted_effect),
    )
}

fn gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (n, d) = (rng.random_range(5..40), rng.random_range(1..8));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
        let weights: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias = rng.random_range(-1.0..1.0);
        let l2 = 1e-3;
        let (_, grad, grad_bias) = loss_and_gradient(&rows, &targets, &weights, bias, l2);
        let h = 1e-5;
        let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        for j in 0..d {
            let (mut up, mut down) = (weights.clone(), weights.clone());
            up[j] += h;
            down[j] -= h;
            let numeric = (loss(&rows, &targets, &up, bias, l2) - loss(&rows, &targets, &down, bias, l2)) / (2.0 * h);
            worst = worst.max(rel(grad[j], numeric));
        }
        let numeric =
            (loss(&rows, &targets, &weights, bias + h, l2) - loss(&rows, &targets, &weights, bias - h, l2)) / (2.0 * h);
        worst = worst.max(rel(grad_bias, numeric));
    }
    worst
}

fn model_numerics() -> Check {
    let grad = gradient_error();
    if grad > 1e-4 {
        return Err(format!("gradient relative error {grad:.2e}"));
    }

    let players: Vec<_> = (0..20)
        .map(|i| gen_sequences(&GeneratorSpec::heterogeneous(format!("cal{i}"), 1000, 5)).unwrap())
        .collect();
    let predictions: Vec<f64> = players.iter().flat_map(|p| p.probabilities.iter().copied()).collect();
    let outcomes: Vec<Outcome> = players
        .iter()
        .flat_map(|p| p.dataset.records().map(|r| r.outcome).collect::<Vec<_>>())
        .collect();
    let report = reliability_curve(&predictions, &outcomes, 10).map_err(|e| e.to_string())?;
    for bin in &report.bins {
        let band = 2.576 * (bin.predicted_mean * (1.0 - bin.predicted_mean) / bin.count as f64).sqrt();
        if (bin.observed_rate - bin.predicted_mean).abs() > band {
            return Err(format!(
                "bin [{}, {}): observed {:.4} vs predicted {:.4} outside +/-{band:.4}",
                bin.lower, bin.upper, bin.observed_rate, bin.predicted_mean
            ));
        }
    }

    let mut spec = GeneratorSpec::heterogeneous("loso", 600, 9);
    spec.n_seasons = 3;
    let records: Vec<ShotRecord> = gen_sequences(&spec).unwrap().dataset.records().cloned().collect();
    let hyper = Hyperparameters {
        max_epochs: 50,
        ..Default::default()
    };
    let predicted = predict_loso::<f64>(&records, &hyper).map_err(|e| e.to_string())?;
    let all: Vec<&str> = {
        let mut s: Vec<&str> = records.iter().map(|r| r.season.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    for (record, provenance) in records.iter().zip(&predicted.provenance) {
        let Provenance::Trained { seasons } = provenance else {
            return Err("untagged LOSO prediction".into());
        };
        let expected: Vec<&str> = all.iter().copied().filter(|s| *s != record.season).collect();
        let got: Vec<&str> = seasons.iter().map(String::as_str).collect();
        if got != expected {
            return Err(format!("season {} scored by model trained on {got:?}", record.season));
        }
    }
    Ok(format!(
        "gradient rel. error {grad:.1e}; {} calibration bins inside 99% bands; LOSO provenance holds over {} seasons",
        report.bins.len(),
        all.len()
    ))
}

fn analyze(args: &[&str], threads: usize) {
    let cli = Cli::try_parse_from(std::iter::once("hothand").chain(args.iter().copied())).expect("valid flags");
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| run(cli))
        .expect("analyze succeeds");
}

fn same_bytes(a: &Path, b: &Path) -> Result<usize, String> {
    let mut files = 0;
    for name in ["results.csv", "league_report.json", "league_table.csv"] {
        if fs::read(a.join(name)).unwrap() != fs::read(b.join(name)).unwrap() {
            return Err(format!("{name} differs between runs"));
        }
        files += 1;
    }
    Ok(files)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let players: Vec<_> = (0..12)
        .map(|i| {
            let mut spec = GeneratorSpec::heterogeneous(format!("P{i:02}"), 400, 3);
            spec.n_seasons = 2;
            if i % 3 == 0 {
                spec = spec.with_hot_hand(0.1, 1);
            }
            gen_sequences(&spec).unwrap()
        })
        .collect();
    let records: Vec<ShotRecord> = players.iter().flat_map(|p| p.dataset.records().cloned()).collect();
    let shots = dir.path().join("shots.csv");
    let probs = dir.path().join("probs.csv");
    hothand::shotlog::write_shot_log(&records, None, fs::File::create(&shots).unwrap()).unwrap();
    write_probability_log(&players, fs::File::create(&probs).unwrap()).unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (shots, probs) = (p("shots.csv"), p("probs.csv"));

    let mut checked = 0;
    for (mode, extra) in [("probs-file", vec!["--probs-file", probs.as_str()]), ("train-loso", vec!["--epochs", "40"])] {
        let (a, b) = (p(&format!("{mode}-a")), p(&format!("{mode}-b")));
        let base = ["analyze", "--input", shots.as_str(), "--min-shots", "100", "--seed", "2024", "--sims", "50"];
        let with = |out: &str| {
            let mut args: Vec<&str> = base.to_vec();
            args.extend(&extra);
            args.extend(["--output", out]);
            args.into_iter().map(String::from).collect::<Vec<_>>()
        };
        let (args_a, args_b) = (with(&a), with(&b));
        analyze(&args_a.iter().map(String::as_str).collect::<Vec<_>>(), 1);
        analyze(&args_b.iter().map(String::as_str).collect::<Vec<_>>(), 4);
        checked += same_bytes(Path::new(&a), Path::new(&b))?;
    }
    Ok(format!("{checked} output files byte-identical across 1- and 4-thread reruns in both model modes"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("adjustment arithmetic (exact)", adjustment_arithmetic),
        ("binomial meta-test", meta_test),
        ("selection-bias oracle", selection_bias_oracle),
        ("null calibration", null_calibration),
        ("power", power),
        ("underestimation by the permutation test", underestimation),
        ("error adjustment", error_adjustment),
        ("model numerics", model_numerics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
