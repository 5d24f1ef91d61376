use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hothand::LeagueReport;

fn hothand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hothand")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hothand(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn league(dir: &Path, players: &str, shots: &str, hot: &str) -> (String, String) {
    let (s, p) = (path(dir, "shots.csv"), path(dir, "probs.csv"));
    ok(&[
        "generate", "--output", &s, "--probs-output", &p, "--players", players, "--shots", shots, "--hot-fraction",
        hot, "--seasons", "2", "--seed", "11",
    ]);
    (s, p)
}

#[test]
fn analyze_writes_results_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (shots, probs) = league(dir.path(), "8", "600", "0.5");
    let out = path(dir.path(), "out");
    ok(&["analyze", "--input", &shots, "--probs-file", &probs, "--output", &out, "--min-shots", "500", "--seed", "1"]);

    let results = fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("# hothand-results v1"));
    assert_eq!(lines.next(), Some("player_id,k,n,observed,sim_mean,e,epsilon,adjusted,p,significant"));
    assert_eq!(lines.count(), 8 * 4);

    let report = LeagueReport::from_json(&fs::read_to_string(Path::new(&out).join("league_report.json")).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.n_players_tested == 8));
    let table = fs::read_to_string(Path::new(&out).join("league_table.csv")).unwrap();
    assert!(table.starts_with("# hothand-league-table v1\nk,hh_players,adj_hh_effect,mean_sequence_length"));

    let meta = ok(&["meta", "--results", &Path::new(&out).join("results.csv").to_string_lossy()]);
    assert!(meta.starts_with("k,tested,significant,alpha,meta_p\n1,8,"));
}

#[test]
fn min_shots_zero_tests_a_single_short_player() {
    let dir = tempfile::tempdir().unwrap();
    let (shots, probs) = league(dir.path(), "1", "40", "0");
    let out = path(dir.path(), "out");
    ok(&["analyze", "--input", &shots, "--probs-file", &probs, "--output", &out, "--min-shots", "0", "--seed", "1"]);
    let results = fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    assert!(results.lines().nth(2).unwrap().starts_with("P0000,1,"));
}

#[test]
fn missing_probability_names_the_shot() {
    let dir = tempfile::tempdir().unwrap();
    let (shots, probs) = league(dir.path(), "2", "40", "0");
    let text = fs::read_to_string(&probs).unwrap();
    let trimmed: Vec<&str> = text.lines().filter(|l| !l.contains(",G00001,P0001,3,")).collect();
    assert_eq!(trimmed.len() + 1, text.lines().count());
    fs::write(&probs, trimmed.join("\n") + "\n").unwrap();

    let out = hothand(&[
        "analyze", "--input", &shots, "--probs-file", &probs, "--output", &path(dir.path(), "o"), "--min-shots", "0",
        "--seed", "1",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("P0001") && err.contains("G00001") && err.contains('3'), "{err}");
}

#[test]
fn malformed_input_names_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let (shots, _) = league(dir.path(), "1", "20", "0");
    let text = fs::read_to_string(&shots).unwrap().replacen(",0,1,", ",0,7,", 1).replacen(",0,0,", ",0,7,", 1);
    fs::write(&shots, text).unwrap();
    let out = hothand(&["analyze", "--input", &shots, "--output", &path(dir.path(), "o"), "--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn seed_is_mandatory_for_analyze_and_simulate() {
    for sub in ["analyze", "simulate"] {
        let out = hothand(&[sub, "--input", "x.csv", "--output", "y"]);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn meta_from_counts() {
    let out = ok(&["meta", "--tested", "153", "--significant", "24", "--alpha", "0.05"]);
    let p: f64 = out.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(p > 0.0 && p < 1e-6);
    assert!(ok(&["meta", "--tested", "10", "--significant", "0"]).ends_with(",1e0\n"));
}

#[test]
fn calibrate_on_calibrated_data_stays_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let (_, probs) = league(dir.path(), "20", "1000", "0");
    let out = path(dir.path(), "cal.csv");
    ok(&["calibrate", "--probs-file", &probs, "--output", &out, "--bins", "10"]);
    let table = fs::read_to_string(&out).unwrap();
    let mut rows = 0;
    for line in table.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (predicted, observed, count) = (cells[2], cells[3], cells[4]);
        let band = 2.576 * (predicted * (1.0 - predicted) / count).sqrt();
        assert!((observed - predicted).abs() <= band, "{line}");
        rows += 1;
    }
    assert!(rows >= 4);
}

#[test]
fn train_model_then_calibrate_with_it() {
    let dir = tempfile::tempdir().unwrap();
    let (shots, _) = league(dir.path(), "6", "500", "0");
    let model = path(dir.path(), "model.json");
    ok(&["train-model", "--input", &shots, "--output", &model, "--seed", "4", "--epochs", "60"]);
    let json = fs::read_to_string(&model).unwrap();
    assert!(json.contains("hothand-logistic-model"));
    assert!(fs::read_to_string(path(dir.path(), "model.calibration.csv")).unwrap().starts_with("# hothand-calibration v1\n"));

    let out = path(dir.path(), "cal.csv");
    ok(&["calibrate", "--input", &shots, "--model", &model, "--output", &out]);
    assert!(fs::read_to_string(&out).unwrap().contains("# accuracy,"));
}

#[test]
fn simulate_null_grid_rejects_near_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "sim.csv");
    ok(&[
        "simulate", "--output", &out, "--players", "300", "--shots", "600", "--deltas", "0", "--test", "heterogeneous",
        "--seed", "8",
    ]);
    let table = fs::read_to_string(&out).unwrap();
    let row = table.lines().nth(2).unwrap();
    assert!(row.starts_with("delta=0,heterogeneous,300,"));
    let rate: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    // 99% binomial band around 0.05 for 300 players
    assert!((0.018..=0.083).contains(&rate), "{row}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (shots, probs) = league(dir.path(), "5", "300", "0.4");
    let runs: Vec<String> = ["a", "b"].iter().map(|n| path(dir.path(), n)).collect();
    for out in &runs {
        ok(&["analyze", "--input", &shots, "--probs-file", &probs, "--output", out, "--min-shots", "0", "--seed", "9"]);
    }
    for name in ["results.csv", "league_report.json", "league_table.csv"] {
        assert_eq!(
            fs::read(Path::new(&runs[0]).join(name)).unwrap(),
            fs::read(Path::new(&runs[1]).join(name)).unwrap(),
            "{name}"
        );
    }
}
