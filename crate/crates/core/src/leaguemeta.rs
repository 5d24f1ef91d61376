//! League-level aggregation: the binomial meta-test over per-player
//! significance calls and sample-size-weighted effect summaries.

use std::fmt::Write as _;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hothand::PlayerTestResult;
use crate::scalar::{FloatScalar, Scalar};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn cast<T: Float>(v: f64) -> T {
    T::from(v).expect("constant fits the scalar type")
}

/// `ln(n!) − ln(√(2πn)·(n/e)^n)` for integer `n ≥ 1`.
fn stirling_error<T: Float>(n: u64) -> T {
    let nf: T = cast(n as f64);
    if n <= 15 {
        let ln_factorial = (2..=n).fold(T::zero(), |acc, i| acc + cast::<T>(i as f64).ln());
        let half_ln_two_pi: T = cast(0.918_938_533_204_672_8);
        return ln_factorial - (nf + cast(0.5)) * nf.ln() + nf - half_ln_two_pi;
    }
    let s0: T = cast(1.0 / 12.0);
    let s1: T = cast(1.0 / 360.0);
    let s2: T = cast(1.0 / 1260.0);
    let s3: T = cast(1.0 / 1680.0);
    let s4: T = cast(1.0 / 1188.0);
    let nn = nf * nf;
    (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nf
}

/// Deviance term `x·ln(x/np) + np − x`, evaluated without cancellation when
/// `x` is close to `np`.
fn deviance<T: Float>(x: T, np: T) -> T {
    if (x - np).abs() < cast::<T>(0.1) * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut sum = (x - np) * v;
        let mut ej = cast::<T>(2.0) * x * v;
        v = v * v;
        for j in 1..1000 {
            ej = ej * v;
            let next = sum + ej / cast(2.0 * j as f64 + 1.0);
            if next == sum {
                return next;
            }
            sum = next;
        }
        return sum;
    }
    x * (x / np).ln() + np - x
}

/// Binomial probability mass `C(n,x)·p^x·(1−p)^(n−x)` by the saddle-point
/// expansion, accurate to a few ulps over the whole support.
pub fn binomial_pmf<T: Float>(x: u64, n: u64, p: T) -> T {
    let q = T::one() - p;
    if x > n {
        return T::zero();
    }
    if x == 0 {
        return (cast::<T>(n as f64) * (-p).ln_1p()).exp();
    }
    if x == n {
        return (cast::<T>(n as f64) * p.ln()).exp();
    }
    let (xf, nf): (T, T) = (cast(x as f64), cast(n as f64));
    let log_core = stirling_error::<T>(n)
        - stirling_error::<T>(x)
        - stirling_error::<T>(n - x)
        - deviance(xf, nf * p)
        - deviance(nf - xf, nf * q);
    let two_pi: T = cast(std::f64::consts::TAU);
    let log_scale = two_pi.ln() + xf.ln() + (-xf / nf).ln_1p();
    (log_core - cast::<T>(0.5) * log_scale).exp()
}

/// Probability of at least `r` significant results among `m` independent
/// tests at level `alpha`: `Σ_{j=r}^{m} C(m,j)·α^j·(1−α)^(m−j)`.
///
/// Sums whichever tail is smaller so the result keeps full relative accuracy
/// both when it is tiny and when it is close to one.
pub fn binomial_meta_test<T: Float>(m: u64, r: u64, alpha: T) -> Result<T> {
    if r > m {
        return Err(Error::InvalidArgument(format!(
            "{r} significant results out of {m} tests"
        )));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if r == 0 {
        return Ok(T::one());
    }
    let mean = cast::<T>(m as f64) * alpha;
    let negligible = T::epsilon() * cast(1e-3);
    if cast::<T>(r as f64) >= mean {
        let mut sum = T::zero();
        for j in r..=m {
            let term = binomial_pmf(j, m, alpha);
            sum = sum + term;
            if term <= sum * negligible {
                break;
            }
        }
        Ok(sum.min(T::one()))
    } else {
        let mut lower = T::zero();
        for j in (0..r).rev() {
            let term = binomial_pmf(j, m, alpha);
            lower = lower + term;
            if term <= lower * negligible {
                break;
            }
        }
        Ok((T::one() - lower).max(T::zero()))
    }
}

/// Which players enter an average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    #[serde(rename = "significant")]
    SignificantOnly,
    #[default]
    All,
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "significant" => Ok(Subset::SignificantOnly),
            "all" => Ok(Subset::All),
            other => Err(Error::InvalidArgument(format!(
                "subset must be `significant` or `all`, got `{other}`"
            ))),
        }
    }
}

/// `Σ value·weight / Σ weight`.
pub fn weighted_mean<T, I>(pairs: I) -> Result<T>
where
    T: Scalar,
    I: IntoIterator<Item = (T, u64)>,
{
    let (num, den) = pairs
        .into_iter()
        .fold((T::zero(), 0u64), |(num, den), (v, w)| (num + v * T::from_u64(w), den + w));
    if den == 0 {
        return Err(Error::UndefinedSample("no weight in the selected subset".into()));
    }
    Ok(num / T::from_u64(den))
}

/// Adjusted effect for streak length `k`, averaged over players with the
/// conditional sample size as weight.
pub fn weighted_effect_summary<T: FloatScalar>(
    results: &[PlayerTestResult<T>],
    k: usize,
    subset: Subset,
) -> Result<T> {
    weighted_mean(
        results
            .iter()
            .filter(|r| subset == Subset::All || r.is_significant(k))
            .filter_map(|r| r.estimate(k))
            .map(|e| (e.adjusted_effect, e.sample_size as u64)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub k_values: Vec<usize>,
    pub alpha: f64,
    /// Players averaged in `mean_sequence_length`.
    pub length_subset: Subset,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            k_values: vec![1, 2, 3, 4],
            alpha: 0.05,
            length_subset: Subset::All,
        }
    }
}

/// One row of the league report.
#[derive(Debug, Clone, PartialEq)]
pub struct LeagueRow<T> {
    pub k: usize,
    /// Players with a defined estimate for this `k` (M).
    pub n_players_tested: u64,
    /// Players significant at `alpha` (r).
    pub n_significant: u64,
    pub meta_p: T,
    /// Weighted adjusted effect over significant players.
    pub weighted_hh_effect: Option<T>,
    pub mean_sequence_length: Option<T>,
    /// Weighted adjusted effect over all tested players.
    pub overall_adjusted_effect: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeagueReport<T> {
    pub alpha: f64,
    pub length_subset: Subset,
    pub rows: Vec<LeagueRow<T>>,
}

pub fn build_league_report<T: FloatScalar>(
    results: &[PlayerTestResult<T>],
    config: &ReportConfig,
) -> Result<LeagueReport<T>> {
    let rows = config
        .k_values
        .iter()
        .map(|&k| {
            let tested: Vec<&PlayerTestResult<T>> =
                results.iter().filter(|r| r.estimate(k).is_some()).collect();
            let m = tested.len() as u64;
            let r = tested.iter().filter(|p| p.is_significant(k)).count() as u64;
            let meta_p = if m == 0 {
                T::one()
            } else {
                binomial_meta_test(m, r, T::from_real(config.alpha))?
            };
            let lengths = tested
                .iter()
                .filter(|p| config.length_subset == Subset::All || p.is_significant(k))
                .filter_map(|p| p.estimate(k))
                .map(|e| (T::from_u64(e.sample_size as u64), 1));
            Ok(LeagueRow {
                k,
                n_players_tested: m,
                n_significant: r,
                meta_p,
                weighted_hh_effect: weighted_effect_summary(results, k, Subset::SignificantOnly).ok(),
                mean_sequence_length: weighted_mean(lengths).ok(),
                overall_adjusted_effect: weighted_effect_summary(results, k, Subset::All).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LeagueReport {
        alpha: config.alpha,
        length_subset: config.length_subset,
        rows,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct RowDocument {
    k: usize,
    n_players_tested: u64,
    n_significant: u64,
    meta_p: f64,
    weighted_hh_effect: Option<f64>,
    mean_sequence_length: Option<f64>,
    overall_adjusted_effect: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDocument {
    schema_version: u32,
    alpha: f64,
    mean_length_subset: Subset,
    rows: Vec<RowDocument>,
}

impl<T: FloatScalar> LeagueReport<T> {
    /// JSON document with one object per `k`.
    pub fn to_json(&self) -> Result<String> {
        let doc = ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            alpha: self.alpha,
            mean_length_subset: self.length_subset,
            rows: self
                .rows
                .iter()
                .map(|r| RowDocument {
                    k: r.k,
                    n_players_tested: r.n_players_tested,
                    n_significant: r.n_significant,
                    meta_p: Scalar::real(r.meta_p),
                    weighted_hh_effect: r.weighted_hh_effect.map(Scalar::real),
                    mean_sequence_length: r.mean_sequence_length.map(Scalar::real),
                    overall_adjusted_effect: r.overall_adjusted_effect.map(Scalar::real),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDocument = serde_json::from_str(text)?;
        if doc.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported report schema version {}",
                doc.schema_version
            )));
        }
        Ok(LeagueReport {
            alpha: doc.alpha,
            length_subset: doc.mean_length_subset,
            rows: doc
                .rows
                .into_iter()
                .map(|r| LeagueRow {
                    k: r.k,
                    n_players_tested: r.n_players_tested,
                    n_significant: r.n_significant,
                    meta_p: T::from_real(r.meta_p),
                    weighted_hh_effect: r.weighted_hh_effect.map(T::from_real),
                    mean_sequence_length: r.mean_sequence_length.map(T::from_real),
                    overall_adjusted_effect: r.overall_adjusted_effect.map(T::from_real),
                })
                .collect(),
        })
    }

    /// Delimited table: `k, # HH players, adj HH effect size, mean sequence
    /// length, overall adj effect size`, followed by the tested count and meta p.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<T>| v.map(|v| Scalar::real(v).to_string()).unwrap_or_default();
        let mut out = String::from(
            "k,hh_players,adj_hh_effect,mean_sequence_length,overall_adj_effect,players_tested,meta_p\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                r.n_significant,
                fmt(r.weighted_hh_effect),
                fmt(r.mean_sequence_length),
                fmt(r.overall_adjusted_effect),
                r.n_players_tested,
                Scalar::real(r.meta_p)
            );
        }
        out
    }
}
