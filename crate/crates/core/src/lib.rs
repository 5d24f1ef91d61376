//! Streakiness ("hot hand") tests for binary success/failure sequences whose
//! trials are independent but not identically distributed.
//!
//! The crate is organized bottom-up:
//!
//! - [`shotlog`]: shot-log ingestion, game filtering and player qualification
//! - [`streakstats`]: conditional samples after `k` makes, base rates, runs test
//! - [`probmodel`]: per-shot make probabilities (logistic baseline, LOSO, calibration)
//! - [`hothand`]: permutation test, heterogeneous-Bernoulli test, model-error adjustment
//! - [`leaguemeta`]: binomial meta-test and league-level effect summaries
//! - [`synthlab`]: synthetic generators, enumeration oracles and power studies
//! - [`cli`]: the batch command-line driver
//!
//! Numeric code is generic over [`Scalar`] (any of `f32`, `f64` or an exact
//! rational) or over [`num_traits::Float`] where transcendental functions are
//! needed. The aliases below fix the common instantiations.

pub mod cli;
pub mod error;
pub mod hothand;
pub mod leaguemeta;
pub mod probmodel;
pub mod rng;
pub mod scalar;
pub mod shotlog;
pub mod streakstats;
pub mod synthlab;

pub use error::{Error, Result};
pub use scalar::{FloatScalar, Scalar};

/// Default floating-point scalar.
pub type Real = f64;

/// Exact rational scalar, used where results must be reproduced without rounding.
pub type Exact = num_rational::Ratio<i64>;

pub type EffectEstimate = hothand::EffectEstimate<Real>;
pub type PlayerTestResult = hothand::PlayerTestResult<Real>;
pub type LeagueReport = leaguemeta::LeagueReport<Real>;
pub type ProbabilityVector = probmodel::ProbabilityVector<Real>;
pub type CalibratedModel = probmodel::CalibratedModel<Real>;
