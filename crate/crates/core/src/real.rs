//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// All grid calculus, bracket aggregation and symplectic linear algebra are
/// written against this trait. Threshold constants that only make sense in
/// double precision (1e-12 style tolerances) are still converted through
/// [`Real::lit`], so `f32` instances run but with correspondingly looser
/// guarantees.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise summation with a fixed block split.
///
/// The split points depend only on the slice length, so the result is
/// identical no matter how the producing loop was scheduled.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = T::zero();
        for &v in values {
            acc = acc + v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_for_small_inputs() {
        let v: Vec<f64> = (0..50).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }

    #[test]
    fn pairwise_is_accurate_on_long_inputs() {
        let v = vec![0.1f64; 1 << 20];
        let s = pairwise_sum(&v);
        assert!((s - 0.1 * (1 << 20) as f64).abs() < 1e-8);
    }
}
