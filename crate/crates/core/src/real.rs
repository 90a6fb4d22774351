//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solver can be instantiated with.
///
/// Implemented for `f32` and `f64`. All tolerances quoted in the docs assume
/// `f64`; the `f32` instantiation is usable for quick looks but will not meet
/// them.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Sum
        + Send
        + Sync
        + rustfft::FftNum
        + 'static
{
}

/// Largest absolute value of a slice; `0` for an empty slice. NaN propagates.
pub fn max_abs<T: Real>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, &v| {
        if v.is_nan() || acc.is_nan() {
            T::nan()
        } else {
            acc.max(v.abs())
        }
    })
}

/// Largest absolute difference between two equally sized slices.
pub fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = (x - y).abs();
        if d.is_nan() || acc.is_nan() {
            T::nan()
        } else {
            acc.max(d)
        }
    })
}
