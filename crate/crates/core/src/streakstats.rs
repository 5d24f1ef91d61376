//! Conditional samples after streaks of makes, base rates and the
//! Wald–Wolfowitz runs test.
//!
//! Streaks use "at least k" semantics: a shot is eligible for streak length
//! `k` when the `k` shots immediately before it, in the same game, were all
//! makes. Streaks never span games.

use num_traits::Float;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shotlog::{GameSequence, Outcome};

/// Position of an eligible shot: index of its game in the input and its
/// game-local position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EligibleShot {
    pub game: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalSample {
    pub k: usize,
    pub eligible_outcomes: Vec<Outcome>,
    pub eligible_indices: Vec<EligibleShot>,
}

impl ConditionalSample {
    pub fn sample_size(&self) -> usize {
        self.eligible_outcomes.len()
    }

    pub fn makes(&self) -> usize {
        self.eligible_outcomes.iter().filter(|o| o.is_make()).count()
    }
}

/// Collects every shot preceded by at least `k` consecutive same-game makes.
pub fn conditional_sample<'a, I>(games: I, k: usize) -> Result<ConditionalSample>
where
    I: IntoIterator<Item = &'a GameSequence>,
{
    conditional_sample_from(games.into_iter().map(|g| g.outcomes.as_slice()), k)
}

/// Same as [`conditional_sample`], over bare per-game outcome slices.
pub fn conditional_sample_from<'a, I>(games: I, k: usize) -> Result<ConditionalSample>
where
    I: IntoIterator<Item = &'a [Outcome]>,
{
    if k == 0 {
        return Err(Error::InvalidArgument("streak length k must be at least 1".into()));
    }
    let mut sample = ConditionalSample {
        k,
        eligible_outcomes: Vec::new(),
        eligible_indices: Vec::new(),
    };
    for (game, outcomes) in games.into_iter().enumerate() {
        let mut run = 0usize;
        for (position, &outcome) in outcomes.iter().enumerate() {
            if run >= k {
                sample.eligible_outcomes.push(outcome);
                sample.eligible_indices.push(EligibleShot { game, position });
            }
            run = if outcome.is_make() { run + 1 } else { 0 };
        }
    }
    Ok(sample)
}

/// Eligible and made counts for every streak length `1..=max_k`, gathered in
/// one pass. Index `k - 1` holds the counts for streak length `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreakCounts {
    pub eligible: Vec<u64>,
    pub makes: Vec<u64>,
}

impl StreakCounts {
    pub fn new(max_k: usize) -> Self {
        StreakCounts {
            eligible: vec![0; max_k],
            makes: vec![0; max_k],
        }
    }

    pub fn max_k(&self) -> usize {
        self.eligible.len()
    }

    /// Adds one game. Must be called once per game so streaks reset.
    pub fn add_game<I>(&mut self, outcomes: I)
    where
        I: IntoIterator<Item = Outcome>,
    {
        let max_k = self.max_k();
        let mut run = 0usize;
        for outcome in outcomes {
            let reach = run.min(max_k);
            let make = outcome.is_make() as u64;
            for idx in 0..reach {
                self.eligible[idx] += 1;
                self.makes[idx] += make;
            }
            run = if outcome.is_make() { run + 1 } else { 0 };
        }
    }

    pub fn sample_size(&self, k: usize) -> u64 {
        self.eligible[k - 1]
    }

    /// Conditional make rate for streak length `k`; `None` when no shot is eligible.
    pub fn rate<T: Scalar>(&self, k: usize) -> Option<T> {
        let n = self.eligible[k - 1];
        (n > 0).then(|| T::from_ratio(self.makes[k - 1], n))
    }
}

/// Fraction of eligible outcomes that are makes. `None` marks an empty sample,
/// which is distinct from a rate of zero.
pub fn conditional_make_rate<T: Scalar>(sample: &ConditionalSample) -> Option<T> {
    let n = sample.sample_size();
    (n > 0).then(|| T::from_ratio(sample.makes() as u64, n as u64))
}

/// Makes over total shots across the given games.
pub fn base_rate<'a, T, I>(games: I) -> Result<T>
where
    T: Scalar,
    I: IntoIterator<Item = &'a GameSequence>,
{
    let (makes, total) = games
        .into_iter()
        .fold((0usize, 0usize), |(m, t), g| (m + g.makes(), t + g.len()));
    if total == 0 {
        return Err(Error::UndefinedSample("base rate of an empty set of shots".into()));
    }
    Ok(T::from_ratio(makes as u64, total as u64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunsTest<T> {
    pub runs: usize,
    pub expected_runs: T,
    pub variance: T,
    pub z: T,
    /// Lower-tail probability: small when there are fewer runs than expected,
    /// i.e. when the sequence is streaky.
    pub p_one_sided: T,
}

/// Wald–Wolfowitz runs test with the normal approximation.
pub fn runs_test<T: Float>(outcomes: &[Outcome]) -> Result<RunsTest<T>> {
    let n1 = outcomes.iter().filter(|o| o.is_make()).count();
    let n2 = outcomes.len() - n1;
    if n1 == 0 || n2 == 0 {
        return Err(Error::Degenerate(
            "runs test needs at least one make and one miss".into(),
        ));
    }
    let runs = 1 + outcomes.windows(2).filter(|w| w[0] != w[1]).count();

    let cast = |v: usize| T::from(v).expect("count fits the scalar type");
    let (n1, n2, n) = (cast(n1), cast(n2), cast(outcomes.len()));
    let one = T::one();
    let two = one + one;
    let product = two * n1 * n2;
    let expected_runs = product / n + one;
    let variance = product * (product - n) / (n * n * (n - one));
    if variance <= T::zero() {
        return Err(Error::Degenerate("runs count has zero variance".into()));
    }
    let z = (cast(runs) - expected_runs) / variance.sqrt();
    let z64 = z.to_f64().unwrap_or(f64::NAN);
    let p = 0.5 * erfc(-z64 / std::f64::consts::SQRT_2);
    Ok(RunsTest {
        runs,
        expected_runs,
        variance,
        z,
        p_one_sided: T::from(p).unwrap_or_else(T::nan),
    })
}
