//! Field histories, the force sampler and backward characteristic tracing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::{PeriodicSpline, PeriodicSplineSolver, PhaseInterpolant};
use crate::phase_space::{vhat, DistSlice, ModelVariant, PhaseGrid, DEFAULT_SUPPORT_TOLERANCE};
use crate::real::Real;
use crate::stencil::{d1, d2};

/// Escape fraction above which [`Transport::transport`] raises its flag.
pub const ESCAPE_FRACTION_LIMIT: f64 = 1e-6;

/// `E`, `A`, `dA/dt`, `dA/dx` and `d2A/dx2` on `(nt + 1) x nx` time-space nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory<T> {
    grid: PhaseGrid<T>,
    nt: usize,
    dt: T,
    pub e: Vec<T>,
    pub a: Vec<T>,
    pub adot: Vec<T>,
    pub dxa: Vec<T>,
    pub dxxa: Vec<T>,
}

impl<T: Real> FieldHistory<T> {
    /// All arrays are `(nt + 1) * nx`, slice-major.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: PhaseGrid<T>,
        nt: usize,
        dt: T,
        e: Vec<T>,
        a: Vec<T>,
        adot: Vec<T>,
        dxa: Vec<T>,
        dxxa: Vec<T>,
    ) -> Result<Self> {
        if nt == 0 {
            return Err(Error::InvalidArgument("nt must be at least 1".into()));
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let expected = (nt + 1) * grid.nx();
        for arr in [&e, &a, &adot, &dxa, &dxxa] {
            if arr.len() != expected {
                return Err(Error::Shape {
                    expected,
                    got: arr.len(),
                });
            }
        }
        Ok(Self {
            grid,
            nt,
            dt,
            e,
            a,
            adot,
            dxa,
            dxxa,
        })
    }

    /// Identically zero fields.
    pub fn zeros(grid: PhaseGrid<T>, nt: usize, dt: T) -> Result<Self> {
        let z = vec![T::zero(); (nt + 1) * grid.nx()];
        Self::new(grid, nt, dt, z.clone(), z.clone(), z.clone(), z.clone(), z)
    }

    /// Constant-in-time extension of `(E0, A0, Adot0)`; the spatial derivatives
    /// of `A0` are taken with the fourth-order periodic stencils.
    pub fn constant_in_time(
        grid: PhaseGrid<T>,
        nt: usize,
        dt: T,
        e0: &[T],
        a0: &[T],
        adot0: &[T],
    ) -> Result<Self> {
        let nx = grid.nx();
        for arr in [e0, a0, adot0] {
            if arr.len() != nx {
                return Err(Error::Shape {
                    expected: nx,
                    got: arr.len(),
                });
            }
        }
        let dxa0 = d1(a0, grid.dx());
        let dxxa0 = d2(a0, grid.dx());
        let rep = |v: &[T]| v.repeat(nt + 1);
        Self::new(grid, nt, dt, rep(e0), rep(a0), rep(adot0), rep(&dxa0), rep(&dxxa0))
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    pub fn t_end(&self) -> T {
        self.dt * T::from_usize_lossy(self.nt)
    }
    pub fn time(&self, s: usize) -> T {
        self.dt * T::from_usize_lossy(s)
    }

    fn range(&self, s: usize) -> std::ops::Range<usize> {
        let nx = self.grid.nx();
        s * nx..(s + 1) * nx
    }
    pub fn e_at(&self, s: usize) -> &[T] {
        &self.e[self.range(s)]
    }
    pub fn a_at(&self, s: usize) -> &[T] {
        &self.a[self.range(s)]
    }
    pub fn adot_at(&self, s: usize) -> &[T] {
        &self.adot[self.range(s)]
    }
    pub fn dxa_at(&self, s: usize) -> &[T] {
        &self.dxa[self.range(s)]
    }
    pub fn dxxa_at(&self, s: usize) -> &[T] {
        &self.dxxa[self.range(s)]
    }

    /// Force `F = E + A dA/dx` on the nodes of slice `s`.
    pub fn force_at(&self, s: usize) -> Vec<T> {
        let r = self.range(s);
        r.map(|k| self.e[k] + self.a[k] * self.dxa[k]).collect()
    }

    /// Largest gap between the registered `dA/dx` and the fourth-order
    /// derivative of `A`, over all slices.
    pub fn dxa_consistency(&self) -> T {
        (0..=self.nt)
            .map(|s| crate::real::max_abs_diff(&d1(self.a_at(s), self.grid.dx()), self.dxa_at(s)))
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// `F(t, x)`: periodic cubic spline in `x` per slice, linear in time.
#[derive(Debug, Clone)]
pub struct ForceSampler<T> {
    grid: PhaseGrid<T>,
    nt: usize,
    dt: T,
    nodes: Vec<Vec<T>>,
    slices: Vec<PeriodicSpline<T>>,
    // spline of the average of consecutive slices; the spline is linear in its
    // data so this equals the time interpolant at theta = 1/2
    mids: Vec<PeriodicSpline<T>>,
}

/// Samples the force of a field history.
pub fn assemble_force<T: Real>(fields: &FieldHistory<T>) -> ForceSampler<T> {
    let nodes: Vec<Vec<T>> = (0..=fields.nt()).map(|s| fields.force_at(s)).collect();
    ForceSampler::from_nodes(*fields.grid(), fields.dt(), nodes)
}

impl<T: Real> ForceSampler<T> {
    /// Builds a sampler from force values `nodes[s][j]` at `nt + 1` slices.
    pub fn from_nodes(grid: PhaseGrid<T>, dt: T, nodes: Vec<Vec<T>>) -> Self {
        assert!(nodes.len() >= 2, "need at least two time slices");
        let nx = grid.nx();
        assert!(nodes.iter().all(|v| v.len() == nx));
        let solver = PeriodicSplineSolver::new(nx);
        let h = grid.dx();
        let slices = nodes.iter().map(|v| PeriodicSpline::new(&solver, h, v)).collect();
        let half = T::lit(0.5);
        let mids = nodes
            .windows(2)
            .map(|w| {
                let avg: Vec<T> = w[0].iter().zip(&w[1]).map(|(&a, &b)| (a + b) * half).collect();
                PeriodicSpline::new(&solver, h, &avg)
            })
            .collect();
        Self {
            grid,
            nt: nodes.len() - 1,
            dt,
            nodes,
            slices,
            mids,
        }
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    /// Node values of slice `s`.
    pub fn nodes(&self, s: usize) -> &[T] {
        &self.nodes[s]
    }

    /// `F` at slice time `s dt`.
    #[inline]
    pub fn at_slice(&self, s: usize, x: T) -> T {
        self.slices[s].eval(x)
    }

    /// `F` halfway between slices `s` and `s + 1`.
    #[inline]
    pub fn at_mid(&self, s: usize, x: T) -> T {
        self.mids[s].eval(x)
    }

    /// `F(t, x)` for any `t`; clamped to the window in time.
    pub fn eval(&self, t: T, x: T) -> T {
        let u = (t / self.dt).max(T::zero());
        let mut lo = u.floor().to_usize().unwrap_or(0);
        if lo >= self.nt {
            lo = self.nt - 1;
        }
        let theta = (u - T::from_usize_lossy(lo)).min(T::one());
        self.force_between(lo, theta, x)
    }

    /// `(1 - theta) F_lo(x) + theta F_{lo+1}(x)`.
    #[inline]
    pub fn force_between(&self, lo: usize, theta: T, x: T) -> T {
        if theta == T::zero() {
            return self.slices[lo].eval(x);
        }
        (T::one() - theta) * self.slices[lo].eval(x) + theta * self.slices[lo + 1].eval(x)
    }

    /// `sup_x |F(t, x)|`, sampled on a grid `refine` times finer than the nodes.
    pub fn sup_at(&self, t: T, refine: usize) -> T {
        let m = self.grid.nx() * refine.max(1);
        let h = self.grid.length() / T::from_usize_lossy(m);
        (0..m).fold(T::zero(), |acc, k| acc.max(self.eval(t, T::from_usize_lossy(k) * h).abs()))
    }
}

/// Foot of a backward characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot<T> {
    /// `X(0)` without periodic wrapping.
    pub x: T,
    /// `X(0)` reduced to `[0, L)`.
    pub x_wrapped: T,
    /// `P(0)`.
    pub p: T,
}

/// Traces `(X, P)` from `(slice dt, x, p)` back to time 0 with RK4, one step per slice.
pub fn trace_back<T: Real>(
    force: &ForceSampler<T>,
    slice: usize,
    x: T,
    p: T,
    variant: ModelVariant,
) -> Foot<T> {
    assert!(slice <= force.nt(), "slice beyond the window");
    let h = -force.dt();
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let (mut xs, mut ps) = (x, p);
    for s in (1..=slice).rev() {
        let kx1 = vhat(ps, variant);
        let kp1 = -force.at_slice(s, xs);
        let p2 = ps + half * kp1;
        let kx2 = vhat(p2, variant);
        let kp2 = -force.at_mid(s - 1, xs + half * kx1);
        let p3 = ps + half * kp2;
        let kx3 = vhat(p3, variant);
        let kp3 = -force.at_mid(s - 1, xs + half * kx2);
        let p4 = ps + h * kp3;
        let kx4 = vhat(p4, variant);
        let kp4 = -force.at_slice(s - 1, xs + h * kx3);
        xs = xs + sixth * (kx1 + two * (kx2 + kx3) + kx4);
        ps = ps + sixth * (kp1 + two * (kp2 + kp3) + kp4);
    }
    Foot {
        x: xs,
        x_wrapped: wrap(xs, force.grid().length()),
        p: ps,
    }
}

/// Same trace with `substeps` RK4 steps per slice, sampling the force by
/// linear time interpolation; `substeps = 1` reproduces [`trace_back`] up to
/// roundoff.
pub fn trace_back_substeps<T: Real>(
    force: &ForceSampler<T>,
    slice: usize,
    x: T,
    p: T,
    variant: ModelVariant,
    substeps: usize,
) -> Foot<T> {
    let m = substeps.max(1);
    let h = -force.dt() / T::from_usize_lossy(m);
    integrate(force, force.time_of(slice), x, p, variant, h, slice * m)
}

/// Traces forward from time 0 to slice `slice`; used to check reversibility.
pub fn trace_forward<T: Real>(
    force: &ForceSampler<T>,
    slice: usize,
    x0: T,
    p0: T,
    variant: ModelVariant,
) -> Foot<T> {
    integrate(force, T::zero(), x0, p0, variant, force.dt(), slice)
}

fn integrate<T: Real>(
    force: &ForceSampler<T>,
    t_start: T,
    x: T,
    p: T,
    variant: ModelVariant,
    h: T,
    steps: usize,
) -> Foot<T> {
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let (mut xs, mut ps) = (x, p);
    for k in 0..steps {
        let t = t_start + h * T::from_usize_lossy(k);
        let kx1 = vhat(ps, variant);
        let kp1 = -force.eval(t, xs);
        let kx2 = vhat(ps + half * kp1, variant);
        let kp2 = -force.eval(t + half, xs + half * kx1);
        let kx3 = vhat(ps + half * kp2, variant);
        let kp3 = -force.eval(t + half, xs + half * kx2);
        let kx4 = vhat(ps + h * kp3, variant);
        let kp4 = -force.eval(t + h, xs + h * kx3);
        xs = xs + sixth * (kx1 + two * (kx2 + kx3) + kx4);
        ps = ps + sixth * (kp1 + two * (kp2 + kp3) + kp4);
    }
    Foot {
        x: xs,
        x_wrapped: wrap(xs, force.grid().length()),
        p: ps,
    }
}

impl<T: Real> ForceSampler<T> {
    fn time_of(&self, s: usize) -> T {
        self.dt * T::from_usize_lossy(s)
    }
}

/// Reduces `x` to `[0, length)`.
#[inline]
pub fn wrap<T: Real>(x: T, length: T) -> T {
    let r = x - (x / length).floor() * length;
    if r >= length || r < T::zero() {
        T::zero()
    } else {
        r
    }
}

/// How many characteristic feet left the momentum box carrying non-negligible `f0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeReport {
    pub escaped: usize,
    pub total: usize,
    pub fraction: f64,
    pub flagged: bool,
}

impl EscapeReport {
    pub fn none(total: usize) -> Self {
        Self {
            escaped: 0,
            total,
            fraction: 0.0,
            flagged: false,
        }
    }

    /// Combines reports from several slices.
    pub fn merge(self, other: Self) -> Self {
        let escaped = self.escaped + other.escaped;
        let total = self.total + other.total;
        let fraction = if total == 0 {
            0.0
        } else {
            escaped as f64 / total as f64
        };
        Self {
            escaped,
            total,
            fraction,
            flagged: fraction > ESCAPE_FRACTION_LIMIT,
        }
    }
}

/// Semi-Lagrangian evaluation of `f(t) = f0(X(0), P(0))`.
///
/// Holds the interpolant of `f0` so that it is built once per window.
#[derive(Debug, Clone)]
pub struct Transport<T> {
    f0: DistSlice<T>,
    interp: PhaseInterpolant<T>,
    ceiling: T,
    support_tolerance: T,
}

impl<T: Real> Transport<T> {
    pub fn new(f0: &DistSlice<T>) -> Self {
        let g = f0.grid();
        Self {
            f0: f0.clone(),
            interp: PhaseInterpolant::new(g.nx(), g.np(), g.dx(), g.dp(), g.p_max(), f0.values()),
            ceiling: f0.max_value(),
            support_tolerance: T::lit(DEFAULT_SUPPORT_TOLERANCE),
        }
    }

    pub fn with_support_tolerance(mut self, tol: T) -> Self {
        self.support_tolerance = tol;
        self
    }

    pub fn f0(&self) -> &DistSlice<T> {
        &self.f0
    }

    /// Interpolated `f0` at an arbitrary phase point, clamped to `[0, max f0]`.
    #[inline]
    pub fn eval_f0(&self, x: T, p: T) -> T {
        self.interp.eval(x, p).max(T::zero()).min(self.ceiling)
    }

    /// `f` at slice `slice` of the force window.
    pub fn transport(
        &self,
        force: &ForceSampler<T>,
        slice: usize,
        variant: ModelVariant,
    ) -> (DistSlice<T>, EscapeReport) {
        let grid = *self.f0.grid();
        if slice == 0 {
            return (self.f0.clone(), EscapeReport::none(grid.len()));
        }
        // values are clamped to [0, max f0], so vacuum stays exactly vacuum
        if self.ceiling == T::zero() {
            return (DistSlice::zeros(grid), EscapeReport::none(grid.len()));
        }
        let np = grid.np();
        let p_max = grid.p_max();
        let ps = grid.ps();
        let rows: Vec<(Vec<T>, usize)> = (0..grid.nx())
            .into_par_iter()
            .map(|j| {
                let x = grid.x(j);
                let mut row = Vec::with_capacity(np);
                let mut escaped = 0;
                for &p in &ps {
                    let foot = trace_back(force, slice, x, p, variant);
                    if foot.p.abs() > p_max {
                        let edge = if foot.p > T::zero() { p_max } else { -p_max };
                        if self.interp.eval(foot.x_wrapped, edge) > self.support_tolerance {
                            escaped += 1;
                        }
                    }
                    row.push(self.eval_f0(foot.x_wrapped, foot.p));
                }
                (row, escaped)
            })
            .collect();
        let mut values = Vec::with_capacity(grid.len());
        let mut escaped = 0;
        for (row, e) in rows {
            values.extend(row);
            escaped += e;
        }
        let report = EscapeReport::none(0).merge(EscapeReport {
            escaped,
            total: grid.len(),
            fraction: 0.0,
            flagged: false,
        });
        (DistSlice::from_trusted(grid, values), report)
    }
}

/// Convenience wrapper building a [`Transport`] for a single call.
pub fn transport_f0<T: Real>(
    f0: &DistSlice<T>,
    force: &ForceSampler<T>,
    slice: usize,
    variant: ModelVariant,
) -> (DistSlice<T>, EscapeReport) {
    Transport::new(f0).transport(force, slice, variant)
}

/// One sample of [`divergence_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSample<T> {
    pub slice: usize,
    pub x: T,
    pub p: T,
    pub dx: T,
    pub dp: T,
    /// `int_0^t ||F1 - F2||_s ds`
    pub bound: T,
}

/// Observed characteristic divergence against the a priori bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport<T> {
    pub samples: Vec<DivergenceSample<T>>,
    /// `max |dP| / bound`
    pub max_ratio_p: T,
    /// `max |dX| / (t bound)`
    pub max_ratio_x: T,
}

impl<T: Real> DivergenceReport<T> {
    pub fn max_ratio(&self) -> T {
        self.max_ratio_p.max(self.max_ratio_x)
    }
}

/// Number of sub-intervals per slice used to resolve the running sup in time.
const BOUND_TIME_REFINE: usize = 8;
/// Spatial oversampling used for the sup norm of `F1 - F2`.
const BOUND_SPACE_REFINE: usize = 8;

/// Compares feet traced under two force histories with the bounds
/// `|dP| <= int_0^t ||F1 - F2||_s ds` and `|dX| <= t int_0^t ||F1 - F2||_s ds`,
/// where `||.||_s` is the sup over `[0, s] x [0, L)`.
pub fn divergence_check<T: Real>(
    f1: &ForceSampler<T>,
    f2: &ForceSampler<T>,
    samples: &[(usize, T, T)],
    variant: ModelVariant,
) -> Result<DivergenceReport<T>> {
    if f1.grid() != f2.grid() || f1.nt() != f2.nt() || f1.dt() != f2.dt() {
        return Err(Error::InvalidArgument(
            "force samplers must share grid and time window".into(),
        ));
    }
    let grid = *f1.grid();
    let nt = f1.nt();
    let dt = f1.dt();
    // running sup of the difference on a fine time grid
    let m = nt * BOUND_TIME_REFINE;
    let tau = dt / T::from_usize_lossy(BOUND_TIME_REFINE);
    let fine_x = grid.nx() * BOUND_SPACE_REFINE;
    let hx = grid.length() / T::from_usize_lossy(fine_x);
    let mut running = Vec::with_capacity(m + 1);
    let mut sup = T::zero();
    for k in 0..=m {
        let t = tau * T::from_usize_lossy(k);
        let here = (0..fine_x).fold(T::zero(), |acc, i| {
            let x = hx * T::from_usize_lossy(i);
            acc.max((f1.eval(t, x) - f2.eval(t, x)).abs())
        });
        sup = sup.max(here);
        running.push(sup);
    }
    // the running sup is nondecreasing, so the right-endpoint rule over-estimates
    // its integral; combined with the time-linear force this keeps the bound safe
    let mut integral = vec![T::zero(); m + 1];
    for k in 1..=m {
        integral[k] = integral[k - 1] + tau * running[k];
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut max_p = T::zero();
    let mut max_x = T::zero();
    for &(slice, x, p) in samples {
        if slice > nt {
            return Err(Error::InvalidArgument(format!(
                "sample slice {slice} beyond window of {nt} slices"
            )));
        }
        let a = trace_back(f1, slice, x, p, variant);
        let b = trace_back(f2, slice, x, p, variant);
        let bound = integral[slice * BOUND_TIME_REFINE];
        let dxv = (a.x - b.x).abs();
        let dpv = (a.p - b.p).abs();
        let t = dt * T::from_usize_lossy(slice);
        let rp = ratio(dpv, bound);
        let rx = ratio(dxv, t * bound);
        max_p = max_p.max(rp);
        max_x = max_x.max(rx);
        out.push(DivergenceSample {
            slice,
            x,
            p,
            dx: dxv,
            dp: dpv,
            bound,
        });
    }
    Ok(DivergenceReport {
        samples: out,
        max_ratio_p: max_p,
        max_ratio_x: max_x,
    })
}

fn ratio<T: Real>(num: T, den: T) -> T {
    if den > T::zero() {
        num / den
    } else if num == T::zero() {
        T::zero()
    } else {
        T::infinity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> PhaseGrid<f64> {
        PhaseGrid::new(2.0 * PI, 32, 6.0, 65).unwrap()
    }

    fn sampler(g: PhaseGrid<f64>, nt: usize, dt: f64, f: impl Fn(f64, f64) -> f64) -> ForceSampler<f64> {
        let nodes = (0..=nt)
            .map(|s| g.xs().iter().map(|&x| f(s as f64 * dt, x)).collect())
            .collect();
        ForceSampler::from_nodes(g, dt, nodes)
    }

    #[test]
    fn zero_a_gives_force_equal_to_e() {
        let g = grid();
        let mut fh = FieldHistory::zeros(g, 4, 0.25).unwrap();
        for (k, v) in fh.e.iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        let fs = assemble_force(&fh);
        for s in 0..=4 {
            assert_eq!(fs.nodes(s), fh.e_at(s));
            for j in 0..g.nx() {
                assert!((fs.at_slice(s, g.x(j)) - fh.e_at(s)[j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn product_force() {
        let g = grid();
        let a0: Vec<f64> = g.xs().iter().map(|x| x.sin()).collect();
        let mut fh = FieldHistory::zeros(g, 2, 0.5).unwrap();
        fh.a = a0.repeat(3);
        fh.dxa = g.xs().iter().map(|x| x.cos()).collect::<Vec<_>>().repeat(3);
        let fs = assemble_force(&fh);
        for (j, &x) in g.xs().iter().enumerate() {
            assert!((fs.nodes(1)[j] - x.sin() * x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn free_streaming_and_constant_force() {
        let g = grid();
        let fs = sampler(g, 10, 0.1, |_, _| 0.0);
        let foot = trace_back(&fs, 10, 1.0, 0.7, ModelVariant::Qr);
        assert!((foot.x - (1.0 - vhat(0.7, ModelVariant::Qr))).abs() < 1e-14);
        assert_eq!(foot.p, 0.7);
        let c = 0.3;
        let fs = sampler(g, 10, 0.1, |_, _| c);
        let foot = trace_back(&fs, 10, 1.0, 0.7, ModelVariant::Nr);
        assert!((foot.p - (0.7 + c)).abs() < 1e-13);
        assert!((foot.x - (1.0 - 0.7 - c / 2.0)).abs() < 1e-13);
    }

    #[test]
    fn fine_step_oracle() {
        let g = PhaseGrid::new(2.0 * PI, 64, 6.0, 65).unwrap();
        let dt = 1.0 / 64.0;
        let fs = sampler(g, 32, dt, |_, x| x.sin());
        for &(x, p) in &[(0.3, 0.5), (2.0, -1.0), (5.5, 0.0)] {
            let a = trace_back(&fs, 32, x, p, ModelVariant::Nr);
            let b = trace_back_substeps(&fs, 32, x, p, ModelVariant::Nr, 64);
            assert!((a.x - b.x).abs() < 1e-6 && (a.p - b.p).abs() < 1e-6);
            let c = trace_back_substeps(&fs, 32, x, p, ModelVariant::Nr, 1);
            assert!((a.x - c.x).abs() < 1e-13 && (a.p - c.p).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_periodicity_and_reversibility() {
        let g = grid();
        let l = g.length();
        let fs = sampler(g, 16, 1.0 / 16.0, |t, x| 0.5 * (x + t).sin() + 0.2 * (2.0 * x).cos());
        let a = trace_back(&fs, 16, 0.9, 0.4, ModelVariant::Qr);
        let b = trace_back(&fs, 16, 0.9 + l, 0.4, ModelVariant::Qr);
        assert!((b.x - a.x - l).abs() < 1e-12);
        assert!((b.p - a.p).abs() < 1e-12);
        let fs = sampler(g, 64, 1.0 / 64.0, |t, x| 0.5 * (x + t).sin() + 0.2 * (2.0 * x).cos());
        let a = trace_back(&fs, 64, 0.9, 0.4, ModelVariant::Qr);
        let back = trace_forward(&fs, 64, a.x, a.p, ModelVariant::Qr);
        assert!((back.x - 0.9).abs() < 1e-9 && (back.p - 0.4).abs() < 1e-9);
        assert!((a.x - 0.9).abs() <= 1.0 + 1e-10);
    }

    #[test]
    fn transport_slice_zero_is_identity_and_free_streaming_is_accurate() {
        let g = PhaseGrid::new(2.0 * PI, 64, 6.0, 129).unwrap();
        let f0 = DistSlice::from_fn(g, |x, p| (1.0 + 0.5 * x.cos()) * (-p * p).exp()).unwrap();
        let fs = sampler(g, 8, 1.0 / 8.0, |_, _| 0.0);
        let tr = Transport::new(&f0);
        let (same, rep) = tr.transport(&fs, 0, ModelVariant::Qr);
        assert_eq!(same, f0);
        assert!(!rep.flagged);
        let (f1, rep) = tr.transport(&fs, 8, ModelVariant::Qr);
        assert!(!rep.flagged);
        let mut err: f64 = 0.0;
        for j in 0..g.nx() {
            for i in 0..g.np() {
                let (x, p) = (g.x(j), g.p(i));
                let exact = (1.0 + 0.5 * (x - vhat(p, ModelVariant::Qr)).cos()) * (-p * p).exp();
                err = err.max((f1.get(j, i) - exact).abs());
            }
        }
        assert!(err < 1e-5, "free streaming error {err}");
        assert!(f1.max_value() <= f0.max_value());
    }

    #[test]
    fn even_data_stays_even() {
        let g = grid();
        let fs = sampler(g, 4, 0.25, |_, _| 0.0);
        let f0 = DistSlice::from_fn(g, |_, p| (-p * p / 2.0).exp()).unwrap();
        let (f1, _) = transport_f0(&f0, &fs, 4, ModelVariant::Nr);
        for j in 0..g.nx() {
            for i in 0..g.np() {
                assert!((f1.get(j, i) - f1.get(j, g.np() - 1 - i)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn divergence_trivial_cases() {
        let g = grid();
        let f1 = sampler(g, 8, 0.125, |t, x| (x - t).sin());
        let rep = divergence_check(&f1, &f1, &[(8, 1.0, 0.5), (3, 2.0, -1.0)], ModelVariant::Qr).unwrap();
        assert_eq!(rep.max_ratio(), 0.0);
        let z = sampler(g, 8, 0.125, |_, _| 0.0);
        let c = sampler(g, 8, 0.125, |_, _| 0.4);
        let rep = divergence_check(&z, &c, &[(8, 1.0, 0.5)], ModelVariant::Nr).unwrap();
        assert!((rep.samples[0].dp - 0.4).abs() < 1e-13);
        assert!((rep.max_ratio_p - 1.0).abs() < 1e-12);
    }
}
