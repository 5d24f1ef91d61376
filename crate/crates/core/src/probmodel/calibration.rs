use crate::error::{Error, Result};
use crate::scalar::FloatScalar;
use crate::shotlog::Outcome;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin<T> {
    pub lower: T,
    pub upper: T,
    pub predicted_mean: T,
    pub observed_rate: T,
    pub count: usize,
}

/// Reliability curve: populated equal-width bins plus thresholded accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport<T> {
    pub bins: Vec<CalibrationBin<T>>,
    /// Fraction of shots where `p ≥ 0.5` agrees with a make.
    pub accuracy: T,
}

impl<T: FloatScalar> CalibrationReport<T> {
    /// Plot-ready table: one row per populated bin.
    pub fn to_table(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,predicted,observed,count\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lower.real(),
                b.upper.real(),
                b.predicted_mean.real(),
                b.observed_rate.real(),
                b.count
            ));
        }
        out
    }
}

pub fn reliability_curve<T: FloatScalar>(
    predictions: &[T],
    outcomes: &[Outcome],
    n_bins: usize,
) -> Result<CalibrationReport<T>> {
    if predictions.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            actual: outcomes.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidArgument("at least one bin is required".into()));
    }
    if predictions.is_empty() {
        return Err(Error::UndefinedSample("no predictions to bin".into()));
    }
    let mut sums = vec![(T::zero(), 0u64, 0usize); n_bins];
    let mut correct = 0u64;
    for (&p, &o) in predictions.iter().zip(outcomes) {
        let pf = p.real();
        if !(0.0..=1.0).contains(&pf) {
            return Err(Error::Validation(format!("prediction {pf} outside [0, 1]")));
        }
        let bin = ((pf * n_bins as f64).floor() as usize).min(n_bins - 1);
        let slot = &mut sums[bin];
        slot.0 = slot.0 + p;
        slot.1 += o.is_make() as u64;
        slot.2 += 1;
        if (pf >= 0.5) == o.is_make() {
            correct += 1;
        }
    }
    let bins = sums
        .into_iter()
        .enumerate()
        .filter(|(_, (_, _, count))| *count > 0)
        .map(|(i, (sum, makes, count))| CalibrationBin {
            lower: T::from_ratio(i as u64, n_bins as u64),
            upper: T::from_ratio(i as u64 + 1, n_bins as u64),
            predicted_mean: sum / T::from_u64(count as u64),
            observed_rate: T::from_ratio(makes, count as u64),
            count,
        })
        .collect();
    Ok(CalibrationReport {
        bins,
        accuracy: T::from_ratio(correct, predictions.len() as u64),
    })
}
