//! Phase-space grid, distribution slices, velocity moments and the majorant
//! bookkeeping behind the a priori density/moment bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, pairwise_sum_by, simpson, trapezoid_weights};
use crate::real::Real;

/// Default threshold below which `f` is considered to vanish at `|p| = p_max`.
pub const DEFAULT_SUPPORT_TOLERANCE: f64 = 1e-10;

/// Periodic `x` grid of period `length` times a symmetric momentum grid.
///
/// `x_j = j dx` for `j < nx`; `p_i = -p_max + i dp` for `i < np`, with `np` odd
/// so that `p = 0` is a node and `p_{np-1-i} = -p_i` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid<T> {
    length: T,
    nx: usize,
    p_max: T,
    np: usize,
    dx: T,
    dp: T,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(length: T, nx: usize, p_max: T, np: usize) -> Result<Self> {
        if nx < 8 {
            return Err(Error::InvalidGrid(format!("nx must be at least 8, got {nx}")));
        }
        if np < 9 {
            return Err(Error::InvalidGrid(format!("np must be at least 9, got {np}")));
        }
        if np % 2 == 0 {
            return Err(Error::InvalidGrid("np must be odd".into()));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid("period L must be positive".into()));
        }
        if !(p_max > T::zero()) || !p_max.is_finite() {
            return Err(Error::InvalidGrid("p_max must be positive".into()));
        }
        Ok(Self {
            length,
            nx,
            p_max,
            np,
            dx: length / T::from_usize_lossy(nx),
            dp: (p_max + p_max) / T::from_usize_lossy(np - 1),
        })
    }

    pub fn length(&self) -> T {
        self.length
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn np(&self) -> usize {
        self.np
    }
    pub fn p_max(&self) -> T {
        self.p_max
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn dp(&self) -> T {
        self.dp
    }
    /// Number of phase-space nodes, `nx * np`.
    pub fn len(&self) -> usize {
        self.nx * self.np
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, j: usize) -> T {
        T::from_usize_lossy(j) * self.dx
    }

    #[inline]
    pub fn p(&self, i: usize) -> T {
        let mid = self.np / 2;
        if i < mid {
            -self.p_max + T::from_usize_lossy(i) * self.dp
        } else if i == mid {
            T::zero()
        } else {
            -self.p(self.np - 1 - i)
        }
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn ps(&self) -> Vec<T> {
        (0..self.np).map(|i| self.p(i)).collect()
    }

    /// Flat index of node `(x_j, p_i)`; storage is row-major with `x` outermost.
    #[inline]
    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.np + i
    }

    /// Trapezoid weights over the momentum grid.
    pub fn p_weights(&self) -> Vec<T> {
        trapezoid_weights(self.np, self.dp)
    }

    /// Same grid with both resolutions doubled (`np` stays odd).
    pub fn refined(&self) -> Self {
        Self::new(self.length, 2 * self.nx, self.p_max, 2 * self.np - 1)
            .expect("refinement of a valid grid is valid")
    }
}

/// Closure of the momentum-velocity relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Non-relativistic: `gamma_1 = gamma_2 = 1`.
    Nr,
    /// Quasi-relativistic: `gamma_1 = sqrt(1 + p^2)`, `gamma_2 = 1`.
    Qr,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelVariant::Nr => f.write_str("nr"),
            ModelVariant::Qr => f.write_str("qr"),
        }
    }
}

/// Velocity `p / gamma_1`.
#[inline]
pub fn vhat<T: Real>(p: T, variant: ModelVariant) -> T {
    match variant {
        ModelVariant::Nr => p,
        ModelVariant::Qr => p / (T::one() + p * p).sqrt(),
    }
}

/// Kinetic energy, an antiderivative of [`vhat`].
#[inline]
pub fn kappa<T: Real>(p: T, variant: ModelVariant) -> T {
    match variant {
        ModelVariant::Nr => p * p * T::lit(0.5),
        ModelVariant::Qr => (T::one() + p * p).sqrt(),
    }
}

/// Nonnegative distribution sampled on a [`PhaseGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistSlice<T> {
    grid: PhaseGrid<T>,
    values: Vec<T>,
}

impl<T: Real> DistSlice<T> {
    /// Validates length, finiteness and nonnegativity.
    pub fn new(grid: PhaseGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                got: values.len(),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidDistribution {
                    x_index: k / grid.np(),
                    p_index: k % grid.np(),
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already known to be valid.
    pub(crate) fn from_trusted(grid: PhaseGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: PhaseGrid<T>) -> Self {
        Self::from_trusted(grid, vec![T::zero(); grid.len()])
    }

    /// Samples `f(x, p)` at every node.
    pub fn from_fn(grid: PhaseGrid<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let ps = grid.ps();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.nx() {
            let x = grid.x(j);
            values.extend(ps.iter().map(|&p| f(x, p)));
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    #[inline]
    pub fn get(&self, j: usize, i: usize) -> T {
        self.values[self.grid.index(j, i)]
    }
    /// Momentum row at `x_j`.
    pub fn row(&self, j: usize) -> &[T] {
        let np = self.grid.np();
        &self.values[j * np..(j + 1) * np]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    /// Largest value on the momentum boundary `|p| = p_max`.
    pub fn boundary_max(&self) -> T {
        let np = self.grid.np();
        (0..self.grid.nx()).fold(T::zero(), |acc, j| {
            acc.max(self.get(j, 0)).max(self.get(j, np - 1))
        })
    }

    /// Checks the momentum truncation: `f` at `|p| = p_max` must stay below `tolerance`.
    pub fn check_support(&self, tolerance: T) -> SupportReport<T> {
        let boundary = self.boundary_max();
        SupportReport {
            boundary_max: boundary,
            tolerance,
            ok: boundary <= tolerance,
        }
    }

    /// Total mass `int int f dx dp` with the module quadrature.
    pub fn mass(&self) -> T {
        let n = moment(self, MomentKind::Density, ModelVariant::Nr);
        self.grid.dx() * pairwise_sum(&n)
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self::from_trusted(self.grid, self.values.iter().map(|&v| v * factor).collect())
    }
}

/// Outcome of [`DistSlice::check_support`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportReport<T> {
    pub boundary_max: T,
    pub tolerance: T,
    pub ok: bool,
}

/// Which velocity moment to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `n = int f dp`
    Density,
    /// `j = int vhat(p) f dp`
    Flux,
    /// `n_gamma = int f / gamma_2 dp`; equal to `n` in both supported closures.
    QuasiDensity,
    /// `m_k = int |p|^k f dp`
    AbsMoment(u32),
}

/// Trapezoid velocity moment at every `x` node.
pub fn moment<T: Real>(f: &DistSlice<T>, kind: MomentKind, variant: ModelVariant) -> Vec<T> {
    let grid = f.grid();
    let w = grid.p_weights();
    let weights: Vec<T> = match kind {
        MomentKind::Density | MomentKind::QuasiDensity => w,
        MomentKind::Flux => (0..grid.np())
            .map(|i| w[i] * vhat(grid.p(i), variant))
            .collect(),
        MomentKind::AbsMoment(k) => (0..grid.np())
            .map(|i| w[i] * grid.p(i).abs().powi(k as i32))
            .collect(),
    };
    (0..grid.nx())
        .map(|j| {
            let row = f.row(j);
            pairwise_sum_by(row.len(), |i| weights[i] * row[i])
        })
        .collect()
}

type EvenFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Continuous, positive, even majorant `g(p)`, decreasing in `|p|`, with
/// cached moments `M_k = int |p|^k g`.
///
/// A plateau shift `r` (see [`g_plateau`]) is tracked explicitly so that its
/// moments follow from those of the base function.
#[derive(Clone)]
pub struct MajorizingFn<T> {
    base: EvenFn<T>,
    // moments of the unshifted function, index k = order
    base_moments: Vec<T>,
    g0: T,
    shift: T,
}

const CACHED_ORDERS: usize = 5;

impl<T: Real> fmt::Debug for MajorizingFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MajorizingFn")
            .field("g0", &self.g0)
            .field("shift", &self.shift)
            .field("base_moments", &self.base_moments)
            .finish()
    }
}

impl<T: Real> MajorizingFn<T> {
    /// `amplitude * exp(-p^2 / (2 width^2))`.
    pub fn gaussian(amplitude: T, width: T) -> Result<Self> {
        if !(amplitude > T::zero()) || !(width > T::zero()) {
            return Err(Error::InvalidArgument(
                "gaussian majorant needs positive amplitude and width".into(),
            ));
        }
        // 2 int_0^inf p^k e^{-p^2/2w^2} = (2w^2)^{(k+1)/2} Gamma((k+1)/2)
        let two_w2 = T::lit(2.0) * width * width;
        let mut gamma_half = vec![T::PI().sqrt(), T::one()];
        for k in 2..CACHED_ORDERS {
            let prev = gamma_half[k - 2];
            gamma_half.push(prev * T::lit((k as f64 - 1.0) / 2.0));
        }
        let base_moments = (0..CACHED_ORDERS)
            .map(|k| amplitude * two_w2.powf(T::lit((k as f64 + 1.0) / 2.0)) * gamma_half[k])
            .collect();
        let inv = T::one() / two_w2;
        Ok(Self {
            base: Arc::new(move |p: T| amplitude * (-(p * p) * inv).exp()),
            base_moments,
            g0: amplitude,
            shift: T::zero(),
        })
    }

    /// `amplitude * exp(-rate |p|)`.
    pub fn exponential(amplitude: T, rate: T) -> Result<Self> {
        if !(amplitude > T::zero()) || !(rate > T::zero()) {
            return Err(Error::InvalidArgument(
                "exponential majorant needs positive amplitude and rate".into(),
            ));
        }
        let mut fact = T::one();
        let base_moments = (0..CACHED_ORDERS)
            .map(|k| {
                if k > 0 {
                    fact = fact * T::from_usize_lossy(k);
                }
                T::lit(2.0) * amplitude * fact / rate.powi(k as i32 + 1)
            })
            .collect();
        Ok(Self {
            base: Arc::new(move |p: T| amplitude * (-rate * p.abs()).exp()),
            base_moments,
            g0: amplitude,
            shift: T::zero(),
        })
    }

    /// Arbitrary majorant; evenness and monotonicity are checked on samples and
    /// moments are computed by Simpson quadrature on `[0, R]` where `g(R)` has
    /// decayed below `1e-17 g(0)`.
    pub fn from_fn(g: impl Fn(T) -> T + Send + Sync + 'static) -> Result<Self> {
        let g0 = g(T::zero());
        if !(g0 > T::zero()) || !g0.is_finite() {
            return Err(Error::InvalidArgument("majorant must be positive at 0".into()));
        }
        let mut cutoff = T::one();
        let floor = g0 * T::lit(1e-17);
        let mut doublings = 0;
        while g(cutoff) > floor {
            cutoff = cutoff + cutoff;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::InvalidArgument("majorant does not decay".into()));
            }
        }
        let samples = 2000;
        let mut prev = g0;
        for k in 0..=samples {
            let p = cutoff * T::from_usize_lossy(k) / T::from_usize_lossy(samples);
            let gp = g(p);
            let gm = g(-p);
            if !(gp > T::zero() || p > T::zero()) || (gp - gm).abs() > T::lit(1e-12) * g0 {
                return Err(Error::InvalidArgument("majorant must be positive and even".into()));
            }
            if gp > prev * (T::one() + T::lit(1e-12)) {
                return Err(Error::InvalidArgument(
                    "majorant must be nonincreasing in |p|".into(),
                ));
            }
            prev = gp;
        }
        let base_moments = (0..CACHED_ORDERS)
            .map(|k| {
                T::lit(2.0)
                    * simpson(|p: T| p.powi(k as i32) * g(p), T::zero(), cutoff, 40_000)
            })
            .collect();
        Ok(Self {
            base: Arc::new(g),
            base_moments,
            g0,
            shift: T::zero(),
        })
    }

    #[inline]
    pub fn eval(&self, p: T) -> T {
        let a = p.abs();
        if a <= self.shift {
            self.g0
        } else {
            (self.base)(a - self.shift)
        }
    }

    /// `g(0)`.
    pub fn g0(&self) -> T {
        self.g0
    }

    /// Plateau half-width `r` accumulated by [`g_plateau`].
    pub fn shift(&self) -> T {
        self.shift
    }

    /// `M_k = int |p|^k g(p) dp` for `k < 5`.
    ///
    /// For a plateau-shifted majorant this is evaluated exactly from the base
    /// moments: `2 g(0) r^{k+1}/(k+1) + sum_{i=0}^{k} C(k,i) r^{k-i} M_i`.
    pub fn moment(&self, k: usize) -> T {
        assert!(k < CACHED_ORDERS, "moments cached up to order 4");
        let r = self.shift;
        if r == T::zero() {
            return self.base_moments[k];
        }
        let plateau =
            T::lit(2.0) * self.g0 * r.powi(k as i32 + 1) / T::from_usize_lossy(k + 1);
        let tail = pairwise_sum_by(k + 1, |i| {
            binomial::<T>(k, i) * r.powi((k - i) as i32) * self.base_moments[i]
        });
        plateau + tail
    }

    /// `M_0`.
    pub fn mass(&self) -> T {
        self.moment(0)
    }
}

/// Binomial coefficient `C(k, i)` as a scalar.
pub fn binomial<T: Real>(k: usize, i: usize) -> T {
    let mut c = T::one();
    for m in 0..i {
        c = c * T::from_usize_lossy(k - m) / T::from_usize_lossy(m + 1);
    }
    c
}

/// Plateau-shifted majorant: `g(0)` on `|p| <= r`, `g(|p| - r)` beyond.
pub fn g_plateau<T: Real>(g: &MajorizingFn<T>, r: T) -> Result<MajorizingFn<T>> {
    if !(r >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "plateau shift must be nonnegative, got {r}"
        )));
    }
    let mut out = g.clone();
    out.shift = g.shift + r;
    Ok(out)
}

/// Uniform density bound `M_0 + 2 g(0) t ||F||_t`.
pub fn density_bound<T: Real>(m0: T, g0: T, t: T, force_norm: T) -> T {
    m0 + T::lit(2.0) * g0 * t * force_norm
}

/// Moment growth term `R_k(M_0 + M_k, r)`:
/// `2 g(0) r^{k+1}/(k+1) + (sum_{i=1}^{k} C(k,i) r^{k-i}) (M_0 + M_k)`.
pub fn moment_bound_rk<T: Real>(k: usize, m0: T, mk: T, g0: T, r: T) -> Result<T> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "R_k is defined for k >= 1; use density_bound for k = 0".into(),
        ));
    }
    let lead = T::lit(2.0) * g0 / T::from_usize_lossy(k + 1) * r.powi(k as i32 + 1);
    let coef = pairwise_sum_by(k, |m| {
        let i = m + 1;
        binomial::<T>(k, i) * r.powi((k - i) as i32)
    });
    Ok(lead + coef * (m0 + mk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> PhaseGrid<f64> {
        PhaseGrid::new(2.0 * std::f64::consts::PI, 16, 8.0, 129).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(PhaseGrid::<f64>::new(1.0, 4, 1.0, 9).is_err());
        assert!(PhaseGrid::<f64>::new(1.0, 8, 1.0, 10).is_err());
        assert!(PhaseGrid::<f64>::new(1.0, 8, 1.0, 7).is_err());
        assert!(PhaseGrid::<f64>::new(-1.0, 8, 1.0, 9).is_err());
    }

    #[test]
    fn p_grid_is_exactly_symmetric() {
        let g = PhaseGrid::new(1.0f64, 8, 3.7, 101).unwrap();
        for i in 0..101 {
            assert_eq!(g.p(100 - i), -g.p(i));
        }
        assert_eq!(g.p(50), 0.0);
        assert_eq!(g.p(0), -3.7);
        assert!((g.dx() * 8.0 - 1.0).abs() <= f64::EPSILON);
        assert!((g.dp() * 100.0 - 7.4).abs() <= 8.0 * f64::EPSILON);
    }

    #[test]
    fn vhat_and_kappa_examples() {
        assert_eq!(vhat(0.0, ModelVariant::Qr), 0.0);
        assert_relative_eq!(vhat(1.0, ModelVariant::Qr), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(vhat(3.0, ModelVariant::Nr), 3.0);
        assert_eq!(kappa(2.0, ModelVariant::Nr), 2.0);
        assert_eq!(kappa(0.0, ModelVariant::Qr), 1.0);
        let h = 1e-4;
        let fd = (kappa(0.7 + h, ModelVariant::Qr) - kappa(0.7 - h, ModelVariant::Qr)) / (2.0 * h);
        assert!((fd - vhat(0.7f64, ModelVariant::Qr)).abs() < 1e-8);
    }

    #[test]
    fn moments_of_zero_and_box() {
        let g = grid();
        let f = DistSlice::zeros(g);
        assert!(moment(&f, MomentKind::Density, ModelVariant::Qr).iter().all(|&v| v == 0.0));
        assert!(moment(&f, MomentKind::Flux, ModelVariant::Qr).iter().all(|&v| v == 0.0));
        // dp = 0.125 so p = +-1 are nodes; trapezoid of a box is exact up to the
        // half-weight endpoint treatment: 2 + 0 (ends at the jump carry dp/2 each).
        let f = DistSlice::from_fn(g, |_, p| if p.abs() <= 1.0 { 1.0 } else { 0.0 }).unwrap();
        let n = moment(&f, MomentKind::Density, ModelVariant::Nr);
        for &v in &n {
            assert!((v - 2.0).abs() <= g.dp() + 1e-14);
        }
        let j = moment(&f, MomentKind::Flux, ModelVariant::Qr);
        assert!(j.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gaussian_density_is_one() {
        let g = grid();
        let f = DistSlice::from_fn(g, |_, p| (-p * p / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())
            .unwrap();
        for v in moment(&f, MomentKind::Density, ModelVariant::Qr) {
            assert!((v - 1.0).abs() < 1e-8);
        }
        let ng = moment(&f, MomentKind::QuasiDensity, ModelVariant::Qr);
        let n = moment(&f, MomentKind::Density, ModelVariant::Qr);
        assert_eq!(ng, n);
        let m2 = moment(&f, MomentKind::AbsMoment(2), ModelVariant::Nr);
        assert!((m2[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn plateau_moments() {
        let g = MajorizingFn::exponential(1.0, 1.0).unwrap();
        assert_relative_eq!(g.mass(), 2.0, epsilon = 1e-14);
        let same = g_plateau(&g, 0.0).unwrap();
        assert_eq!(same.mass(), g.mass());
        assert_eq!(same.eval(0.3), g.eval(0.3));
        let g5 = g_plateau(&g, 0.5).unwrap();
        assert_relative_eq!(g5.mass(), 3.0, epsilon = 1e-14);
        assert_eq!(g5.eval(0.4), 1.0);
        assert_relative_eq!(g5.eval(-1.5), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(g_plateau(&g, -0.1).is_err());
    }

    #[test]
    fn numeric_majorant_matches_closed_form() {
        let g = MajorizingFn::from_fn(|p: f64| (-p * p / 2.0).exp()).unwrap();
        let h = MajorizingFn::gaussian(1.0, 1.0).unwrap();
        for k in 0..5 {
            assert_relative_eq!(g.moment(k), h.moment(k), max_relative = 1e-10);
        }
        assert!(MajorizingFn::from_fn(|p: f64| (if p > 0.0 { 1.0 } else { 0.5 }) * (-p.abs()).exp()).is_err());
        assert!(MajorizingFn::from_fn(|p: f64| (1.0 + p * p).powi(2) * (-p.abs()).exp()).is_err());
    }

    #[test]
    fn bounds_arithmetic() {
        assert_eq!(density_bound(2.0, 1.0, 0.0, 5.0), 2.0);
        assert_eq!(density_bound(2.0, 1.0, 1.0, 0.5), 3.0);
        assert_eq!(moment_bound_rk(1, 1.0, 2.0, 5.0, 0.0).unwrap(), 3.0);
        assert_eq!(moment_bound_rk(1, 1.0, 2.0, 1.0, 1.0).unwrap(), 4.0);
        assert!(moment_bound_rk(0, 1.0, 1.0, 1.0, 1.0).is_err());
    }
}
