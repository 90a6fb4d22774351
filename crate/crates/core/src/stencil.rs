//! Periodic finite-difference operators and the matching Poisson inverse.
//!
//! `d1` and `d2` are the fourth-order central stencils on a periodic grid.
//! [`PeriodicPoisson`] inverts `-d1(d1(.))`, the operator for which the
//! discrete summation-by-parts identity `sum(phi * -d1 d1 phi) = sum((d1 phi)^2)`
//! holds exactly, so energy functionals built from it agree to round-off.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::real::Real;

/// Fourth-order periodic first derivative.
pub fn d1<T: Real>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let inv = T::one() / (T::lit(12.0) * h);
    let eight = T::lit(8.0);
    (0..n)
        .map(|j| {
            let m2 = values[(j + n - 2) % n];
            let m1 = values[(j + n - 1) % n];
            let p1 = values[(j + 1) % n];
            let p2 = values[(j + 2) % n];
            (m2 - eight * m1 + eight * p1 - p2) * inv
        })
        .collect()
}

/// Fourth-order periodic second derivative.
pub fn d2<T: Real>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let inv = T::one() / (T::lit(12.0) * h * h);
    let sixteen = T::lit(16.0);
    let thirty = T::lit(30.0);
    (0..n)
        .map(|j| {
            let m2 = values[(j + n - 2) % n];
            let m1 = values[(j + n - 1) % n];
            let c = values[j];
            let p1 = values[(j + 1) % n];
            let p2 = values[(j + 2) % n];
            (-m2 + sixteen * m1 - thirty * c + sixteen * p1 - p2) * inv
        })
        .collect()
}

/// Second-order periodic second derivative (used by the leapfrog cross-check).
pub fn d2_second_order<T: Real>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let inv = T::one() / (h * h);
    let two = T::lit(2.0);
    (0..n)
        .map(|j| (values[(j + n - 1) % n] - two * values[j] + values[(j + 1) % n]) * inv)
        .collect()
}

/// Fourth-order first derivative along a strided, non-periodic line, evaluated at
/// interior index `i` (requires `2 <= i < n - 2`).
#[inline]
pub fn d1_interior<T: Real>(get: impl Fn(usize) -> T, i: usize, h: T) -> T {
    let eight = T::lit(8.0);
    (get(i - 2) - eight * get(i - 1) + eight * get(i + 1) - get(i + 2)) / (T::lit(12.0) * h)
}

/// Inverse of `-d1 d1` on mean-free, Nyquist-free periodic data.
#[derive(Clone)]
pub struct PeriodicPoisson<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    // 1 / symbol(-d1 d1) per mode, zero on the kernel
    inv_symbol: Vec<T>,
}

impl<T: Real> std::fmt::Debug for PeriodicPoisson<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicPoisson").field("n", &self.n).finish()
    }
}

impl<T: Real> PeriodicPoisson<T> {
    pub fn new(n: usize, h: T) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let two_pi = T::PI() + T::PI();
        let eight = T::lit(8.0);
        let six_h = T::lit(6.0) * h;
        let nn = T::from_usize_lossy(n);
        let tiny = T::epsilon().sqrt();
        let inv_symbol = (0..n)
            .map(|k| {
                let theta = two_pi * T::from_usize_lossy(k) / nn;
                let s = (eight * theta.sin() - (theta + theta).sin()) / six_h;
                let sym = s * s;
                // kernel of d1: the constant mode and (for even n) the Nyquist mode
                if sym * h * h < tiny {
                    T::zero()
                } else {
                    T::one() / sym
                }
            })
            .collect();
        Self {
            n,
            forward,
            inverse,
            inv_symbol,
        }
    }

    /// Solves `-d1 d1 u = rhs` with the component of `rhs` in the kernel dropped;
    /// the returned `u` has zero mean.
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        assert_eq!(rhs.len(), self.n);
        let mut buf: Vec<Complex<T>> = rhs.iter().map(|&r| Complex::new(r, T::zero())).collect();
        self.forward.process(&mut buf);
        for (c, &w) in buf.iter_mut().zip(&self.inv_symbol) {
            *c = *c * w;
        }
        self.inverse.process(&mut buf);
        let scale = T::one() / T::from_usize_lossy(self.n);
        buf.iter().map(|c| c.re * scale).collect()
    }
}
