//! Floating-point scalar used by every metric in the crate.
//!
//! Entropies, F1 scores, crossing-alignment means and percentages are all
//! computed generically; `f64` is the default everywhere a concrete type is
//! needed (see the aliases at the crate root).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A real scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a count.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("every u64 is representable as a float")
    }

    /// `num / den`, with `0/0` defined as zero.
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Self::zero()
        } else {
            Self::from_count(num) / Self::from_count(den)
        }
    }

    fn hundred() -> Self {
        Self::from_u8(100).unwrap()
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Mean of an iterator of scalars; zero for an empty iterator.
pub fn mean<S: Scalar, I: IntoIterator<Item = S>>(values: I) -> S {
    let mut sum = S::zero();
    let mut n = 0u64;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    if n == 0 {
        S::zero()
    } else {
        sum / S::from_count(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_handles_zero_denominator() {
        assert_eq!(f64::ratio(0, 0), 0.0);
        assert_eq!(f32::ratio(1, 4), 0.25);
    }

    #[test]
    fn mean_of_empty_is_zero() {
        assert_eq!(mean::<f64, _>(std::iter::empty()), 0.0);
        assert_eq!(mean([1.0f32, 3.0]), 2.0);
    }
}
