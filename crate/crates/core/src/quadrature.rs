//! Fixed-order summation and the trapezoid rules used by every integral.
//!
//! Sums are evaluated by a pairwise tree whose shape depends only on the
//! length of the input, so a result never depends on how the terms were
//! produced (sequentially or in parallel).

use crate::real::Real;

const PAIRWISE_LEAF: usize = 8;

/// Pairwise (cascade) summation with a fixed tree shape.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    if values.len() <= PAIRWISE_LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc = acc + v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without allocating for short ranges.
pub fn pairwise_sum_by<T: Real>(n: usize, f: impl Fn(usize) -> T) -> T {
    fn rec<T: Real>(lo: usize, hi: usize, f: &impl Fn(usize) -> T) -> T {
        if hi - lo <= PAIRWISE_LEAF {
            let mut acc = T::zero();
            for i in lo..hi {
                acc = acc + f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, n, &f)
}

/// Composite trapezoid weights for `n` uniformly spaced nodes with spacing `h`.
pub fn trapezoid_weights<T: Real>(n: usize, h: T) -> Vec<T> {
    let mut w = vec![h; n];
    if n >= 2 {
        let half = h * T::lit(0.5);
        w[0] = half;
        w[n - 1] = half;
    } else if n == 1 {
        w[0] = T::zero();
    }
    w
}

/// Trapezoid integral over a closed uniform grid.
pub fn trapezoid<T: Real>(values: &[T], h: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let half = T::lit(0.5);
    let interior = pairwise_sum(&values[1..n - 1]);
    h * (interior + half * (values[0] + values[n - 1]))
}

/// Trapezoid integral over one period of a periodic grid (rectangle sum).
pub fn periodic_integral<T: Real>(values: &[T], h: T) -> T {
    h * pairwise_sum(values)
}

/// Cumulative trapezoid: `out[k] = int_0^{x_k}`, `out[0] = 0`.
pub fn cumulative_trapezoid<T: Real>(values: &[T], h: T) -> Vec<T> {
    let half = h * T::lit(0.5);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in values.windows(2) {
        acc = acc + half * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Composite Simpson rule on `[a, b]` with `n` (rounded up to even) panels.
pub fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, n: usize) -> T {
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let inner = pairwise_sum_by(n - 1, |k| {
        let i = k + 1;
        let w = if i % 2 == 1 { four } else { two };
        w * f(a + h * T::from_usize_lossy(i))
    });
    h / T::lit(3.0) * (f(a) + f(b) + inner)
}
