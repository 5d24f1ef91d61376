use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, Num};

/// Field-like scalar used for rates and effect arithmetic.
///
/// Implemented for `f32`, `f64` and `Ratio<i64>`, so that pure arithmetic
/// (rates from counts, adjusted effects, weighted averages) can be carried out
/// exactly when needed.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync {
    /// `num / den` in this scalar type. `den` must be non-zero.
    fn from_ratio(num: u64, den: u64) -> Self;

    fn from_u64(value: u64) -> Self {
        Self::from_ratio(value, 1)
    }

    fn real(self) -> f64;
}

/// Floating-point [`Scalar`]s (`f32`, `f64`), for code that needs square
/// roots, logarithms or infinities.
pub trait FloatScalar: Scalar + Float {
    fn from_real(value: f64) -> Self {
        <Self as num_traits::NumCast>::from(value).expect("finite f64 converts")
    }
}

impl<T: Scalar + Float> FloatScalar for T {}

impl Scalar for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn real(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn real(self) -> f64 {
        self as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_ratio(num: u64, den: u64) -> Self {
        Ratio::new(num as i64, den as i64)
    }

    fn real(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Parses a decimal literal such as `"0.426"` or `"-12.5"` into an exact ratio.
pub fn exact_decimal(text: &str) -> Option<Ratio<i64>> {
    let text = text.trim();
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let scale = 10i64.checked_pow(frac_part.len() as u32)?;
    let int_value: i64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let frac_value: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
    let numer = int_value.checked_mul(scale)?.checked_add(frac_value)?;
    let value = Ratio::new(numer, scale);
    Some(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decimal_parses() {
        assert_eq!(exact_decimal("0.426"), Some(Ratio::new(426, 1000)));
        assert_eq!(exact_decimal("-0.014"), Some(Ratio::new(-14, 1000)));
        assert_eq!(exact_decimal("3"), Some(Ratio::from_integer(3)));
        assert_eq!(exact_decimal(".5"), Some(Ratio::new(1, 2)));
        assert_eq!(exact_decimal("abc"), None);
        assert_eq!(exact_decimal("."), None);
    }

    #[test]
    fn ratio_from_counts_is_reduced() {
        let third: Ratio<i64> = Scalar::from_ratio(2, 6);
        assert_eq!(third, Ratio::new(1, 3));
        assert!((Scalar::real(third) - 1.0 / 3.0).abs() < 1e-15);
    }
}
