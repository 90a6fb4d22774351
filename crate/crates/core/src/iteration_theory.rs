//! The scalar recurrence `v_{k+1} = phi_t(v_k)` with
//! `phi_t(v) = alpha + beta t exp(t (1 + v))`: fixed points, critical times and
//! iteration verdicts.

use crate::error::{Error, Result};
use crate::real::Real;

/// Exponent beyond which [`phi`] reports `+inf`.
pub const EXP_GUARD: f64 = 700.0;
/// Tolerance on `min (phi_t - id)` separating the tangent case.
pub const TANGENT_TOLERANCE: f64 = 1e-10;
/// Step size below which [`iterate_v`] declares convergence.
pub const STEP_TOLERANCE: f64 = 1e-12;
/// Value beyond which [`iterate_v`] declares divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e9;

/// Offset `alpha >= 0` and gain `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiParams<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> PhiParams<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(alpha >= T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }
}

/// `alpha + beta t exp(t (1 + v))`, `+inf` once the exponent exceeds 700.
pub fn phi<T: Real>(v: T, t: T, params: PhiParams<T>) -> T {
    if t == T::zero() {
        return params.alpha;
    }
    let arg = t * (T::one() + v);
    if arg > T::lit(EXP_GUARD) {
        return T::infinity();
    }
    params.alpha + params.beta * t * arg.exp()
}

/// `d phi_t / dv = beta t^2 exp(t (1 + v))`.
pub fn phi_prime<T: Real>(v: T, t: T, params: PhiParams<T>) -> T {
    let arg = t * (T::one() + v);
    if arg > T::lit(EXP_GUARD) {
        return T::infinity();
    }
    params.beta * t * t * arg.exp()
}

/// Root of an increasing function on `(0, inf)` by bracketing and bisection,
/// stopping when `|g(t) - 1| <= 1e-12` or the bracket cannot shrink further.
fn increasing_root<T: Real>(g: impl Fn(T) -> T) -> T {
    let tol = T::lit(1e-12);
    let mut lo = T::zero();
    let mut hi = T::one();
    while g(hi) < T::one() {
        lo = hi;
        hi = hi + hi;
    }
    loop {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let v = g(mid);
        if (v - T::one()).abs() <= tol {
            return mid;
        }
        if v < T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Root of `beta t^2 exp(alpha t^2 + 2t) = 1`, the critical time in its
/// published form.
pub fn compute_t1<T: Real>(params: PhiParams<T>) -> T {
    let (a, b) = (params.alpha, params.beta);
    increasing_root(|t: T| b * t * t * (a * t * t + t + t).exp())
}

/// Time at which `phi_t` becomes tangent to the identity:
/// root of `beta t^2 exp(1 + t (1 + alpha)) = 1`.
///
/// Two fixed points exist exactly for `0 < t` below this time.
pub fn tangency_time<T: Real>(params: PhiParams<T>) -> T {
    let (a, b) = (params.alpha, params.beta);
    increasing_root(|t: T| b * t * t * (T::one() + t * (T::one() + a)).exp())
}

/// `(1/t) ln(1 / (beta t^2)) - 1`, where `phi_t' = 1`.
pub fn x_tangent<T: Real>(t: T, beta: T) -> Result<T> {
    if t == T::zero() {
        return Err(Error::InvalidArgument("x_tangent is undefined at t = 0".into()));
    }
    Ok((T::one() / (beta * t * t)).ln() / t - T::one())
}

/// Classification of the solutions of `phi_t(v) = v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPoints<T> {
    /// `t = 0`: `phi_0` is the constant `alpha`.
    Degenerate(T),
    /// Stable `low` and unstable `high` fixed points.
    Two { low: T, high: T },
    /// Double root at the tangency abscissa.
    Tangent(T),
    None,
}

fn bisect<T: Real>(g: impl Fn(T) -> T, mut pos: T, mut neg: T) -> T {
    for _ in 0..400 {
        let mid = (pos + neg) * T::lit(0.5);
        if mid == pos || mid == neg {
            break;
        }
        if g(mid) > T::zero() {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    (pos + neg) * T::lit(0.5)
}

/// Solves `phi_t(v) = v` by bisection on both sides of the minimiser of
/// `phi_t - id`.
pub fn fixed_points<T: Real>(t: T, params: PhiParams<T>) -> Result<FixedPoints<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    if t == T::zero() {
        return Ok(FixedPoints::Degenerate(params.alpha));
    }
    let g = |v: T| phi(v, t, params) - v;
    let vstar = x_tangent(t, params.beta)?;
    let m = g(vstar);
    if m.abs() <= T::lit(TANGENT_TOLERANCE) {
        return Ok(FixedPoints::Tangent(vstar));
    }
    if m > T::zero() {
        return Ok(FixedPoints::None);
    }
    let mut step = vstar.abs().max(T::one());
    let mut left = vstar - step;
    while g(left) <= T::zero() {
        step = step + step;
        left = vstar - step;
    }
    let mut step = T::one();
    let mut right = vstar + step;
    while g(right) <= T::zero() {
        step = step + step;
        right = vstar + step;
    }
    let low = bisect(g, left, vstar);
    let high = bisect(g, right, vstar);
    if !(phi_prime(low, t, params) < T::one() && phi_prime(high, t, params) > T::one()) {
        // roots merged within floating point: report the double root
        return Ok(FixedPoints::Tangent(vstar));
    }
    Ok(FixedPoints::Two { low, high })
}

/// Outcome of [`iterate_v`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict<T> {
    /// `limit` reached after `steps` applications of `phi_t`.
    Converged { limit: T, steps: usize },
    /// Exceeded `1e9` (or overflowed) at step `steps`.
    Diverged { steps: usize },
    Undecided,
}

/// Iterates `v_{k+1} = phi_t(v_k)` at most `max_steps` times.
pub fn iterate_v<T: Real>(v0: T, t: T, params: PhiParams<T>, max_steps: usize) -> Result<(Vec<T>, Verdict<T>)> {
    if max_steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let mut seq = vec![v0];
    let mut v = v0;
    for k in 1..=max_steps {
        let next = phi(v, t, params);
        seq.push(next);
        if !next.is_finite() || next > T::lit(DIVERGENCE_THRESHOLD) {
            return Ok((seq, Verdict::Diverged { steps: k }));
        }
        if (next - v).abs() <= T::lit(STEP_TOLERANCE) {
            return Ok((
                seq,
                Verdict::Converged {
                    limit: next,
                    steps: k - 1,
                },
            ));
        }
        v = next;
    }
    Ok((seq, Verdict::Undecided))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p11() -> PhiParams<f64> {
        PhiParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(3.0, 0.0, p11()), 1.0);
        assert!((phi(0.0, 1.0, p11()) - (1.0 + std::f64::consts::E)).abs() < 1e-15);
        assert_eq!(phi(1000.0, 1.0, p11()), f64::INFINITY);
        let h = 1e-3;
        for k in 0..20 {
            let v = -3.0 + 0.5 * k as f64;
            let dd = phi(v + h, 0.4, p11()) - 2.0 * phi(v, 0.4, p11()) + phi(v - h, 0.4, p11());
            assert!(dd > 0.0);
            assert!(phi(v + h, 0.4, p11()) > phi(v, 0.4, p11()));
        }
        assert!(PhiParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn critical_times() {
        let t1 = compute_t1(p11());
        assert!((t1 - 0.5196301715066209).abs() < 1e-9);
        assert!(compute_t1(PhiParams::new(1.0, 1e6).unwrap()) < t1);
        let tt = tangency_time(p11());
        assert!((tt - 0.4046738485459385).abs() < 1e-9);
        match fixed_points(tt, p11()).unwrap() {
            FixedPoints::Tangent(_) => {}
            FixedPoints::Two { low, high } => assert!((high - low).abs() < 1e-3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tangent_abscissa() {
        assert!((x_tangent(0.1, 1.0).unwrap() - (10.0 * 100f64.ln() - 1.0)).abs() < 1e-12);
        assert_eq!(x_tangent(1.0, 1.0).unwrap(), -1.0);
        assert!(x_tangent(0.01, 1.0).unwrap() > x_tangent(0.1, 1.0).unwrap());
        assert!(x_tangent(0.0, 1.0).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(fixed_points(0.0, p11()).unwrap(), FixedPoints::Degenerate(1.0));
        match fixed_points(0.1, p11()).unwrap() {
            FixedPoints::Two { low, high } => {
                assert!((low - 1.12366004).abs() < 1e-7);
                assert!((phi(low, 0.1, p11()) - low).abs() < 1e-10);
                assert!((phi(high, 0.1, p11()) - high).abs() < 1e-8 * high);
            }
            other => panic!("unexpected {other:?}"),
        }
        let t1 = compute_t1(p11());
        assert_eq!(fixed_points(2.0 * t1, p11()).unwrap(), FixedPoints::None);
    }

    #[test]
    fn iteration_verdicts() {
        let (seq, v) = iterate_v(5.0, 0.0, p11(), 10).unwrap();
        assert_eq!(seq[1], 1.0);
        assert_eq!(v, Verdict::Converged { limit: 1.0, steps: 1 });
        let (_, v) = iterate_v(0.0, 0.1, p11(), 100).unwrap();
        match v {
            Verdict::Converged { limit, .. } => assert!((limit - 1.12366004).abs() < 1e-7),
            other => panic!("unexpected {other:?}"),
        }
        let t1 = compute_t1(p11());
        let (_, v) = iterate_v(0.0, 2.0 * t1, p11(), 60).unwrap();
        assert!(matches!(v, Verdict::Diverged { .. }));
        let (_, v) = iterate_v(0.0, 0.1, p11(), 2).unwrap();
        assert_eq!(v, Verdict::Undecided);
    }

    #[test]
    fn low_root_rises_toward_tangency() {
        // phi_t increases with t, so the attracting root moves up and the
        // repelling one down until they merge at the tangency time
        let mut prev: Option<(f64, f64)> = None;
        for t in [0.1, 0.2, 0.3, 0.4] {
            let FixedPoints::Two { low, high } = fixed_points(t, p11()).unwrap() else {
                panic!("expected two roots at t = {t}");
            };
            if let Some((l, h)) = prev {
                assert!(low > l && high < h);
            }
            prev = Some((low, high));
        }
    }
}
