//! Per-shot make probabilities.
//!
//! The baseline model is logistic regression over standardized numeric shot
//! features and one-hot categoricals (shot type, shooter, defender). Any other
//! source of calibrated probabilities can be supplied through
//! [`ProbabilityVector::external`].

mod calibration;
mod encoding;
mod logistic;
mod loso;

pub use calibration::{reliability_curve, CalibrationBin, CalibrationReport};
pub use encoding::{FeatureEncoder, Standardizer, Vocabulary, CATEGORICAL_FEATURES, NUMERIC_FEATURES};
pub use logistic::{loss, loss_and_gradient, sigmoid, train, CalibratedModel, Hyperparameters};
pub use loso::{align_to_players, predict_loso, probability_lookup, ProbabilityVector, Provenance};
