use hothand::hothand::{hetero_bernoulli_test, test_player, SimulationConfig};
use hothand::shotlog::{GameSequence, Outcome, PlayerDataset};
use hothand::streakstats::{conditional_make_rate, conditional_sample};

fn game(id: &str, text: &str) -> GameSequence {
    GameSequence::from_outcomes("P", id, &Outcome::parse_sequence(text).unwrap())
}

#[test]
fn streak_at_end_of_game_does_not_carry_over() {
    let games = [game("G1", "XMMM"), game("G2", "MXXM")];
    let sample = conditional_sample(&games, 3).unwrap();
    assert_eq!(sample.sample_size(), 0);

    let joined = [game("G1", "XMMMMXXM")];
    assert_eq!(conditional_sample(&joined, 3).unwrap().sample_size(), 2);
}

#[test]
fn injected_streaks_split_across_games_leave_rates_untouched() {
    // Every game ends with a run of three makes and opens with a miss.
    // Joined end to end, each opener would follow three makes.
    let games: Vec<GameSequence> = (0..10).map(|g| game(&format!("G{g:02}"), "XMXMXMMM")).collect();
    let split = conditional_sample(&games, 3).unwrap();
    let rate: Option<f64> = conditional_make_rate(&split);
    assert_eq!(split.sample_size(), 0);
    assert_eq!(rate, None);

    let k1 = conditional_sample(&games, 1).unwrap();
    assert_eq!(k1.sample_size(), 10 * 4);
    assert!(k1.eligible_indices.iter().all(|e| e.position > 0));
}

#[test]
fn simulation_respects_game_boundaries() {
    // Two-shot games: no shot can follow two makes inside a game.
    let games: Vec<GameSequence> = (0..30).map(|g| game(&format!("G{g:02}"), "MM")).collect();
    let probs = vec![0.99; 60];
    let config = SimulationConfig {
        k_values: vec![1, 2],
        ..SimulationConfig::with_seed(3)
    };
    assert!(hetero_bernoulli_test::<f64>(&games, &probs, 2, &config).is_err());

    let dataset = PlayerDataset::new("P", games);
    let result = test_player::<f64>(&dataset, &probs, &config).unwrap();
    assert_eq!(result.untestable, vec![2]);
    let k1 = result.estimate(1).unwrap();
    assert_eq!(k1.sample_size, 30);
    assert!(k1.sim_rates.iter().flatten().all(|r| *r >= 0.0 && *r <= 1.0));
}
