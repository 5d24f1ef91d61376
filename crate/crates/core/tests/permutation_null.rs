use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hothand::hothand::permutation_test;
use hothand::shotlog::{GameSequence, Outcome};

fn ks_against_uniform(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn permutation_p_values_are_uniform_under_iid_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut p_values = Vec::new();
    let mut seed = 0;
    while p_values.len() < 500 {
        seed += 1;
        let outcomes: Vec<Outcome> = (0..50).map(|_| Outcome::from(rng.random_bool(0.5))).collect();
        let game = GameSequence::from_outcomes("iid", "G1", &outcomes);
        if let Ok(result) = permutation_test::<f64>(&[game], 1, 1000, seed) {
            p_values.push(result.p_value);
        }
    }
    let d = ks_against_uniform(p_values);
    let critical = 1.63 / 500f64.sqrt();
    assert!(d < critical, "KS distance {d:.4} exceeds {critical:.4}");
}
