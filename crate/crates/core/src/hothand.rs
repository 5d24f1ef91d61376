//! Per-player streakiness tests.
//!
//! Two nulls are supported:
//!
//! - **identical trials**: outcomes are exchangeable within each game, tested by
//!   shuffling each game's outcomes ([`permutation_test`]);
//! - **heterogeneous trials**: shot `i` is an independent Bernoulli draw with
//!   its own probability `p_i`, tested by simulating the whole sequence
//!   ([`hetero_bernoulli_test`]).
//!
//! The heterogeneous test compares the observed make rate after `k` makes with
//! its simulated expectation (raw effect `e`), then subtracts the probability
//! model's bias on an unconditioned random subset of the same size (model
//! error `ε`), giving the adjusted effect `ê = e − ε`.
//!
//! Randomness is keyed: replicate `r` of a player always draws from the stream
//! `(master_seed, player_id, r)` and the null subset for streak length `k`
//! from `(master_seed, player_id, k)`, so results do not depend on scheduling.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::{FloatScalar, Scalar};
use crate::shotlog::{GameSequence, Outcome, PlayerDataset};
use crate::streakstats::StreakCounts;

/// How the per-player p-value is computed from the paired replicate effects
/// `ê_r = (observed − sim_r) − (null_observed − null_sim_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignificanceMethod {
    /// One-sided t-test treating the observed effect as one further draw from
    /// the replicate distribution: `t = ê / (s·√(1 + 1/n))`, `n − 1` degrees of
    /// freedom. Calibrated under the null.
    #[default]
    Predictive,
    /// One-sample one-sided t-test of `mean(ê_r) > 0` with standard error
    /// `s/√n`. Its variance reflects simulation noise only, so it rejects far
    /// more often than `alpha` under the null; kept for comparison.
    ReplicateMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_sims: usize,
    pub master_seed: u64,
    pub k_values: Vec<usize>,
    pub alpha: f64,
    pub significance: SignificanceMethod,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_sims: 100,
            master_seed: 0,
            k_values: vec![1, 2, 3, 4],
            alpha: 0.05,
            significance: SignificanceMethod::Predictive,
        }
    }
}

impl SimulationConfig {
    pub fn with_seed(master_seed: u64) -> Self {
        SimulationConfig {
            master_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sims < 2 {
            return Err(Error::InvalidArgument("n_sims must be at least 2".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidArgument(
                "k values must be a non-empty set of positive integers".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_values.iter().copied().max().unwrap_or(1)
    }
}

/// Effect estimate for one player and one streak length.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate<T> {
    pub k: usize,
    /// Conditional sample size `n_{π,k}`; also the null subset size.
    pub sample_size: usize,
    pub observed_rate: T,
    /// Replicate conditional rates; `None` where a replicate had no streak of length `k`.
    pub sim_rates: Vec<Option<T>>,
    pub sim_mean: T,
    pub raw_effect: T,
    pub null_observed_rate: T,
    pub null_sim_rates: Vec<T>,
    pub null_sim_mean: T,
    pub model_error: T,
    pub adjusted_effect: T,
    /// `None` when fewer than two replicates had a defined conditional rate.
    pub p_value: Option<T>,
}

impl<T: FloatScalar> EffectEstimate<T> {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.sample_size > 0 && self.p_value.is_some_and(|p| Scalar::real(p) < alpha)
    }

    pub fn defined_replicates(&self) -> usize {
        self.sim_rates.iter().flatten().count()
    }
}

/// Results of the heterogeneous test for one player across streak lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerTestResult<T> {
    pub player_id: String,
    pub total_shots: usize,
    /// One estimate per tested `k` with a non-empty conditional sample, in `k` order.
    pub estimates: Vec<EffectEstimate<T>>,
    /// Requested `k` values whose observed conditional sample was empty.
    pub untestable: Vec<usize>,
    pub significant: Vec<bool>,
}

impl<T: FloatScalar> PlayerTestResult<T> {
    pub fn estimate(&self, k: usize) -> Option<&EffectEstimate<T>> {
        self.estimates.iter().find(|e| e.k == k)
    }

    pub fn is_significant(&self, k: usize) -> bool {
        self.estimates
            .iter()
            .zip(&self.significant)
            .any(|(e, &s)| e.k == k && s)
    }
}

/// `ê = e − ε`.
pub fn adjusted_effect<T: Scalar>(raw_effect: T, model_error: T) -> T {
    raw_effect - model_error
}

/// Outcomes of all games laid end to end, with game lengths for splitting.
struct FlatGames {
    outcomes: Vec<Outcome>,
    lens: Vec<usize>,
}

impl FlatGames {
    fn new(games: &[GameSequence]) -> Self {
        FlatGames {
            outcomes: games.iter().flat_map(|g| g.outcomes.iter().copied()).collect(),
            lens: games.iter().map(GameSequence::len).collect(),
        }
    }

    fn counts(&self, outcomes: &[Outcome], max_k: usize) -> StreakCounts {
        let mut counts = StreakCounts::new(max_k);
        let mut start = 0;
        for &len in &self.lens {
            counts.add_game(outcomes[start..start + len].iter().copied());
            start += len;
        }
        counts
    }
}

fn check_probabilities<T: FloatScalar>(total: usize, probabilities: &[T]) -> Result<Vec<f64>> {
    if probabilities.len() != total {
        return Err(Error::LengthMismatch {
            expected: total,
            actual: probabilities.len(),
        });
    }
    probabilities
        .iter()
        .map(|p| {
            let p = Scalar::real(*p);
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(Error::Validation(format!("probability {p} outside [0, 1]")))
            }
        })
        .collect()
}

/// Draws one heterogeneous-Bernoulli realisation.
pub fn simulate_sequence<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> Vec<Outcome> {
    probabilities
        .iter()
        .map(|&p| Outcome::from(rng.random::<f64>() < p))
        .collect()
}

/// Replicate sequences shared by the conditional and null estimates of a player.
struct Replicates {
    flat: FlatGames,
    sims: Vec<Vec<Outcome>>,
}

impl Replicates {
    fn simulate(
        games: &[GameSequence],
        probabilities: &[f64],
        n_sims: usize,
        master_seed: u64,
        key: &str,
    ) -> Self {
        let sims = (0..n_sims)
            .map(|r| {
                let mut rng = rng::stream(master_seed, key, Purpose::Replicate, r as u64);
                simulate_sequence(probabilities, &mut rng)
            })
            .collect();
        Replicates {
            flat: FlatGames::new(games),
            sims,
        }
    }

    fn conditional<T: FloatScalar>(&self, k: usize) -> Result<ConditionalPart<T>> {
        let observed_counts = self.flat.counts(&self.flat.outcomes, k);
        let sample_size = observed_counts.sample_size(k) as usize;
        let observed_rate: T = observed_counts.rate(k).ok_or_else(|| {
            Error::UndefinedSample(format!("no shot follows {k} consecutive makes"))
        })?;
        let sim_rates: Vec<Option<T>> = self
            .sims
            .iter()
            .map(|sim| self.flat.counts(sim, k).rate(k))
            .collect();
        let sim_mean = mean(sim_rates.iter().flatten().copied()).ok_or_else(|| {
            Error::InsufficientData(format!("no replicate produced a streak of {k} makes"))
        })?;
        Ok(ConditionalPart {
            sample_size,
            observed_rate,
            sim_rates,
            sim_mean,
        })
    }

    fn null<T: FloatScalar>(&self, subset: &[usize]) -> NullPart<T> {
        let m = subset.len() as u64;
        let makes = |outcomes: &[Outcome]| subset.iter().filter(|&&i| outcomes[i].is_make()).count() as u64;
        let null_observed_rate = T::from_ratio(makes(&self.flat.outcomes), m);
        let null_sim_rates: Vec<T> = self.sims.iter().map(|sim| T::from_ratio(makes(sim), m)).collect();
        let null_sim_mean = mean(null_sim_rates.iter().copied()).unwrap_or_else(T::nan);
        NullPart {
            null_observed_rate,
            null_sim_rates,
            null_sim_mean,
        }
    }
}

struct ConditionalPart<T> {
    sample_size: usize,
    observed_rate: T,
    sim_rates: Vec<Option<T>>,
    sim_mean: T,
}

/// Null-shot comparison returned by [`model_error_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct NullPart<T> {
    pub null_observed_rate: T,
    pub null_sim_rates: Vec<T>,
    pub null_sim_mean: T,
}

impl<T: Scalar> NullPart<T> {
    /// `ε = observed − simulated` make rate on the null subset.
    pub fn model_error(&self) -> T {
        self.null_observed_rate - self.null_sim_mean
    }
}

fn mean<T: FloatScalar, I: Iterator<Item = T>>(values: I) -> Option<T> {
    let (sum, n) = values.fold((T::zero(), 0u64), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / T::from_u64(n))
}

/// Uniform random subset of `m` of `total` shot indices, sorted.
fn null_subset(total: usize, m: usize, master_seed: u64, key: &str, k: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::UndefinedSample("null subset of size 0".into()));
    }
    if m > total {
        return Err(Error::InvalidArgument(format!(
            "null subset of {m} shots exceeds the {total} available"
        )));
    }
    let mut rng = rng::stream(master_seed, key, Purpose::NullSubset, k as u64);
    let mut subset = index::sample(&mut rng, total, m).into_vec();
    subset.sort_unstable();
    Ok(subset)
}

fn player_key(games: &[GameSequence]) -> &str {
    games.first().map(|g| g.player_id.as_str()).unwrap_or("")
}

/// Simulated conditional make rates under the heterogeneous null.
///
/// Returns an estimate whose raw effect `e = observed − mean(defined sim rates)`
/// is filled in; the null-shot fields are left at zero until combined with
/// [`model_error_estimate`] (see [`test_player`]).
pub fn hetero_bernoulli_test<T: FloatScalar>(
    games: &[GameSequence],
    probabilities: &[T],
    k: usize,
    config: &SimulationConfig,
) -> Result<EffectEstimate<T>> {
    config.validate()?;
    let total = games.iter().map(GameSequence::len).sum();
    let probabilities = check_probabilities(total, probabilities)?;
    let replicates = Replicates::simulate(games, &probabilities, config.n_sims, config.master_seed, player_key(games));
    let part = replicates.conditional::<T>(k)?;
    let raw_effect = part.observed_rate - part.sim_mean;
    Ok(EffectEstimate {
        k,
        sample_size: part.sample_size,
        observed_rate: part.observed_rate,
        sim_rates: part.sim_rates,
        sim_mean: part.sim_mean,
        raw_effect,
        null_observed_rate: T::zero(),
        null_sim_rates: Vec::new(),
        null_sim_mean: T::zero(),
        model_error: T::zero(),
        adjusted_effect: raw_effect,
        p_value: None,
    })
}

/// Model bias on a random subset of `m` of the player's shots, drawn without
/// conditioning on previous outcomes. `k` selects the subset stream so each
/// streak length gets an independent subset.
pub fn model_error_estimate<T: FloatScalar>(
    games: &[GameSequence],
    probabilities: &[T],
    m: usize,
    k: usize,
    config: &SimulationConfig,
) -> Result<NullPart<T>> {
    config.validate()?;
    let total = games.iter().map(GameSequence::len).sum();
    let probabilities = check_probabilities(total, probabilities)?;
    let key = player_key(games);
    let subset = null_subset(total, m, config.master_seed, key, k)?;
    let replicates = Replicates::simulate(games, &probabilities, config.n_sims, config.master_seed, key);
    Ok(replicates.null(&subset))
}

/// One-sided p-value for `H1: ê > 0` from the paired replicate effects.
pub fn player_significance<T: FloatScalar>(
    estimate: &EffectEstimate<T>,
    method: SignificanceMethod,
) -> Result<T> {
    let null_gap = estimate.null_observed_rate;
    let paired: Vec<f64> = estimate
        .sim_rates
        .iter()
        .zip(&estimate.null_sim_rates)
        .filter_map(|(sim, &null_sim)| {
            sim.map(|sim| {
                Scalar::real((estimate.observed_rate - sim) - (null_gap - null_sim))
            })
        })
        .collect();
    let n = paired.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} paired replicates; the t-test needs at least 2"
        )));
    }
    let nf = n as f64;
    let mean = paired.iter().sum::<f64>() / nf;
    let var = paired.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let se = match method {
        SignificanceMethod::Predictive => sd * (1.0 + 1.0 / nf).sqrt(),
        SignificanceMethod::ReplicateMean => sd / nf.sqrt(),
    };
    // A spread below rounding noise is treated as zero variance.
    let p = if se <= 1e-12 * mean.abs().max(1e-300) || se == 0.0 {
        if mean > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("valid degrees of freedom");
        dist.sf(mean / se)
    };
    Ok(T::from_real(p))
}

/// Runs the heterogeneous test with model-error adjustment for every
/// configured `k`.
pub fn test_player<T: FloatScalar>(
    dataset: &PlayerDataset,
    probabilities: &[T],
    config: &SimulationConfig,
) -> Result<PlayerTestResult<T>> {
    config.validate()?;
    let games = &dataset.games;
    let total = dataset.total_shots;
    let probabilities = check_probabilities(total, probabilities)?;
    let key = dataset.player_id.as_str();
    let replicates = Replicates::simulate(games, &probabilities, config.n_sims, config.master_seed, key);

    let mut k_values = config.k_values.clone();
    k_values.sort_unstable();
    k_values.dedup();

    let mut estimates = Vec::new();
    let mut untestable = Vec::new();
    for k in k_values {
        let part = match replicates.conditional::<T>(k) {
            Ok(part) => part,
            Err(Error::UndefinedSample(_)) | Err(Error::InsufficientData(_)) => {
                untestable.push(k);
                continue;
            }
            Err(e) => return Err(e),
        };
        let subset = null_subset(total, part.sample_size, config.master_seed, key, k)?;
        let null = replicates.null::<T>(&subset);
        let raw_effect = part.observed_rate - part.sim_mean;
        let model_error = null.model_error();
        let mut estimate = EffectEstimate {
            k,
            sample_size: part.sample_size,
            observed_rate: part.observed_rate,
            sim_rates: part.sim_rates,
            sim_mean: part.sim_mean,
            raw_effect,
            null_observed_rate: null.null_observed_rate,
            null_sim_rates: null.null_sim_rates,
            null_sim_mean: null.null_sim_mean,
            model_error,
            adjusted_effect: adjusted_effect(raw_effect, model_error),
            p_value: None,
        };
        estimate.p_value = player_significance(&estimate, config.significance).ok();
        estimates.push(estimate);
    }
    let significant = estimates.iter().map(|e| e.is_significant(config.alpha)).collect();
    Ok(PlayerTestResult {
        player_id: dataset.player_id.clone(),
        total_shots: total,
        estimates,
        untestable,
        significant,
    })
}

/// Result of the within-game permutation test.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationResult<T> {
    pub k: usize,
    pub sample_size: usize,
    pub observed: T,
    /// `None` where a permutation left no streak of length `k`.
    pub perm_rates: Vec<Option<T>>,
    /// Fraction of defined permutations whose rate is at least the observed one.
    pub p_value: T,
}

impl<T: Scalar> PermutationResult<T> {
    pub fn perm_mean(&self) -> Option<T> {
        let (sum, n) = self
            .perm_rates
            .iter()
            .flatten()
            .fold((T::zero(), 0u64), |(s, n), &v| (s + v, n + 1));
        (n > 0).then(|| sum / T::from_u64(n))
    }
}

/// Permutation test for identical trials: outcomes are shuffled within each
/// game independently, keeping every game's make count.
pub fn permutation_test<T: Scalar>(
    games: &[GameSequence],
    k: usize,
    n_perms: usize,
    seed: u64,
) -> Result<PermutationResult<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("streak length k must be at least 1".into()));
    }
    let flat = FlatGames::new(games);
    let observed_counts = flat.counts(&flat.outcomes, k);
    let (obs_makes, obs_n) = (observed_counts.makes[k - 1], observed_counts.eligible[k - 1]);
    if obs_n == 0 {
        return Err(Error::UndefinedSample(format!("no shot follows {k} consecutive makes")));
    }

    let mut rng = rng::stream(seed, player_key(games), Purpose::Permutation, k as u64);
    let mut shuffled = flat.outcomes.clone();
    let mut perm_rates = Vec::with_capacity(n_perms);
    let (mut defined, mut at_least) = (0u64, 0u64);
    for _ in 0..n_perms {
        let mut start = 0;
        for &len in &flat.lens {
            shuffled[start..start + len].shuffle(&mut rng);
            start += len;
        }
        let counts = flat.counts(&shuffled, k);
        let (makes, n) = (counts.makes[k - 1], counts.eligible[k - 1]);
        if n == 0 {
            perm_rates.push(None);
            continue;
        }
        defined += 1;
        // makes/n >= obs_makes/obs_n, compared exactly
        if makes * obs_n >= obs_makes * n {
            at_least += 1;
        }
        perm_rates.push(Some(T::from_ratio(makes, n)));
    }
    if defined == 0 {
        return Err(Error::InsufficientData(
            "no permutation produced a streak of the requested length".into(),
        ));
    }
    Ok(PermutationResult {
        k,
        sample_size: obs_n as usize,
        observed: T::from_ratio(obs_makes, obs_n),
        perm_rates,
        p_value: T::from_ratio(at_least, defined),
    })
}
