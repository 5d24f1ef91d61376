//! Logistic-linear make-probability model trained by full-batch gradient
//! descent with backtracking line search and validation early stopping.

use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::encoding::FeatureEncoder;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::{FloatScalar, Scalar};
use crate::shotlog::ShotRecord;

pub const MODEL_FORMAT: &str = "hothand-logistic-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Initial step of the backtracking line search.
    pub step_size: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            step_size: 4.0,
            max_epochs: 500,
            patience: 5,
            validation_fraction: 0.2,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    fn validate(&self) -> Result<()> {
        if self.step_size.is_nan() || self.step_size <= 0.0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument("step size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation fraction must lie in [0, 1)".into()));
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::InvalidArgument("l2 penalty must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn sigmoid<T: Float>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Float>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Penalized mean logistic loss and its gradient with respect to
/// `(weights, bias)`.
pub fn loss_and_gradient<T: FloatScalar>(
    rows: &[Vec<T>],
    targets: &[T],
    weights: &[T],
    bias: T,
    l2: T,
) -> (T, Vec<T>, T) {
    let n = T::from_u64(rows.len() as u64);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); weights.len()];
    let mut grad_bias = T::zero();
    for (row, &y) in rows.iter().zip(targets) {
        let z = dot(row, weights) + bias;
        // y·(−log σ(z)) + (1−y)·(−log(1−σ(z))) = softplus(z) − y·z
        loss = loss + softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, &x) in grad.iter_mut().zip(row) {
            *g = *g + residual * x;
        }
        grad_bias = grad_bias + residual;
    }
    let half = T::from_ratio(1, 2);
    let penalty = half * l2 * dot(weights, weights);
    for (g, &w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (loss / n + penalty, grad, grad_bias / n)
}

/// Penalized loss only.
pub fn loss<T: FloatScalar>(rows: &[Vec<T>], targets: &[T], weights: &[T], bias: T, l2: T) -> T {
    let n = T::from_u64(rows.len().max(1) as u64);
    let data = rows
        .iter()
        .zip(targets)
        .fold(T::zero(), |acc, (row, &y)| {
            let z = dot(row, weights) + bias;
            acc + softplus(z) - y * z
        });
    data / n + T::from_ratio(1, 2) * l2 * dot(weights, weights)
}

/// Trained model with its frozen encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel<T> {
    pub encoder: FeatureEncoder,
    pub weights: Vec<T>,
    pub bias: T,
    pub training_seasons: Vec<String>,
    pub hyperparameters: Hyperparameters,
    /// Penalized training loss after each epoch, starting with the initial model.
    pub training_loss: Vec<T>,
    pub validation_loss: Vec<T>,
}

impl<T: FloatScalar> CalibratedModel<T> {
    /// Model with all-zero weights; predicts 0.5 everywhere.
    pub fn zero(encoder: FeatureEncoder) -> Self {
        let width = encoder.width();
        CalibratedModel {
            encoder,
            weights: vec![T::zero(); width],
            bias: T::zero(),
            training_seasons: Vec::new(),
            hyperparameters: Hyperparameters::default(),
            training_loss: Vec::new(),
            validation_loss: Vec::new(),
        }
    }

    pub fn predict(&self, record: &ShotRecord) -> Result<T> {
        let row = self.encoder.encode::<T>(record)?;
        Ok(sigmoid(dot(&row, &self.weights) + self.bias))
    }

    pub fn predict_all<'a, I>(&self, records: I) -> Result<Vec<T>>
    where
        I: IntoIterator<Item = &'a ShotRecord>,
    {
        records.into_iter().map(|r| self.predict(r)).collect()
    }

    /// Self-describing JSON text.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            schema_version: MODEL_SCHEMA_VERSION,
            training_seasons: self.training_seasons.clone(),
            seed: self.hyperparameters.seed,
            hyperparameters: self.hyperparameters.clone(),
            encoder: self.encoder.clone(),
            weights: self.weights.iter().map(|&w| Scalar::real(w)).collect(),
            bias: Scalar::real(self.bias),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format `{}` v{}",
                doc.format, doc.schema_version
            )));
        }
        if doc.weights.len() != doc.encoder.width() {
            return Err(Error::LengthMismatch {
                expected: doc.encoder.width(),
                actual: doc.weights.len(),
            });
        }
        Ok(CalibratedModel {
            encoder: doc.encoder,
            weights: doc.weights.into_iter().map(T::from_real).collect(),
            bias: T::from_real(doc.bias),
            training_seasons: doc.training_seasons,
            hyperparameters: doc.hyperparameters,
            training_loss: Vec::new(),
            validation_loss: Vec::new(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    schema_version: u32,
    training_seasons: Vec<String>,
    seed: u64,
    hyperparameters: Hyperparameters,
    encoder: FeatureEncoder,
    weights: Vec<f64>,
    bias: f64,
}

/// Fits the logistic model on `records`.
///
/// A seeded shuffle holds out `validation_fraction` of the records; training
/// stops once the validation loss has not improved for `patience` epochs and
/// the best-validation parameters are returned. Each epoch is one gradient
/// step whose length is halved until the training loss does not increase.
pub fn train<T: FloatScalar>(records: &[ShotRecord], hyper: &Hyperparameters) -> Result<CalibratedModel<T>> {
    hyper.validate()?;
    let makes = records.iter().filter(|r| r.outcome.is_make()).count();
    if makes == 0 || makes == records.len() {
        return Err(Error::Training(
            "training outcomes must contain both makes and misses".into(),
        ));
    }
    let encoder = FeatureEncoder::fit(records)?;
    let rows = records
        .iter()
        .map(|r| encoder.encode::<T>(r))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<T> = records
        .iter()
        .map(|r| if r.outcome.is_make() { T::one() } else { T::zero() })
        .collect();

    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = rng::stream(hyper.seed, "train", Purpose::Training, records.len() as u64);
    order.shuffle(&mut rng);
    let n_valid = ((records.len() as f64) * hyper.validation_fraction).floor() as usize;
    let n_valid = n_valid.min(records.len() - 1);
    let (valid_idx, train_idx) = order.split_at(n_valid);
    let pick = |idx: &[usize]| -> (Vec<Vec<T>>, Vec<T>) {
        (idx.iter().map(|&i| rows[i].clone()).collect(), idx.iter().map(|&i| targets[i]).collect())
    };
    let (train_rows, train_y) = pick(train_idx);
    let (valid_rows, valid_y) = pick(valid_idx);

    let l2 = T::from_real(hyper.l2);
    let mut weights = vec![T::zero(); encoder.width()];
    let mut bias = T::zero();
    let (mut current, mut grad, mut grad_bias) = loss_and_gradient(&train_rows, &train_y, &weights, bias, l2);
    let mut training_loss = vec![current];
    let validation = |w: &[T], b: T| loss(&valid_rows, &valid_y, w, b, T::zero());
    let mut validation_loss = Vec::new();
    let mut best = (weights.clone(), bias, if valid_rows.is_empty() { current } else { validation(&weights, bias) });
    let mut stale = 0usize;
    let mut step = T::from_real(hyper.step_size);
    let armijo = T::from_real(1e-4);
    let half = T::from_ratio(1, 2);

    for _ in 0..hyper.max_epochs {
        let grad_sq = dot(&grad, &grad) + grad_bias * grad_bias;
        if grad_sq <= T::epsilon() * T::epsilon() {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial_w: Vec<T> = weights.iter().zip(&grad).map(|(&w, &g)| w - step * g).collect();
            let trial_b = bias - step * grad_bias;
            let trial = loss(&train_rows, &train_y, &trial_w, trial_b, l2);
            if trial <= current - armijo * step * grad_sq {
                accepted = Some((trial_w, trial_b));
                break;
            }
            step = step * half;
        }
        let Some((w, b)) = accepted else { break };
        weights = w;
        bias = b;
        let (l, g, gb) = loss_and_gradient(&train_rows, &train_y, &weights, bias, l2);
        current = l;
        grad = g;
        grad_bias = gb;
        training_loss.push(current);
        // let the step grow back after successful iterations
        step = (step + step).min(T::from_real(hyper.step_size));

        if valid_rows.is_empty() {
            best = (weights.clone(), bias, current);
            continue;
        }
        let v = validation(&weights, bias);
        validation_loss.push(v);
        if v < best.2 {
            best = (weights.clone(), bias, v);
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                break;
            }
        }
    }

    let mut seasons: Vec<String> = records.iter().map(|r| r.season.clone()).collect();
    seasons.sort_unstable();
    seasons.dedup();
    Ok(CalibratedModel {
        encoder,
        weights: best.0,
        bias: best.1,
        training_seasons: seasons,
        hyperparameters: hyper.clone(),
        training_loss,
        validation_loss,
    })
}
