//! Entropy generators, periodic Vlasov-Poisson equilibria
//! `f = gamma(kappa(p) - Phi(x) - alpha)`, their perturbations and stability runs.

use crate::diagnostics::{
    h1_distance, lp_distance, relative_entropy, solve_potential, transversal_energy, DiagnosticsContext,
    Reference,
};
use crate::error::{Error, Result};
use crate::fixed_point::{solve, SolveConfig, SolveOutcome};
use crate::phase_space::{kappa, moment, vhat, DistSlice, ModelVariant, MomentKind, PhaseGrid, DEFAULT_SUPPORT_TOLERANCE};
use crate::quadrature::{pairwise_sum_by, periodic_integral};
use crate::real::{max_abs, Real};
use crate::stencil::{d1, d1_interior};
use rayon::prelude::*;

/// Damping factor of the equilibrium Picard iteration.
pub const DEFAULT_DAMPING: f64 = 0.5;
/// Stopping threshold on `sup |Phi_{k+1} - Phi_k|`.
pub const PICARD_TOLERANCE: f64 = 1e-10;
/// Sweep limit of the equilibrium Picard iteration.
pub const MAX_SWEEPS: usize = 2000;
/// Relative tolerance of the inner multiplier solve.
pub const ALPHA_TOLERANCE: f64 = 1e-12;

/// Convex Casimir density `sigma` and the generalised inverse `gamma` of `-sigma'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyGenerator<T> {
    /// `sigma(s) = s ln s - s`, `gamma(y) = exp(-y)`.
    Maxwellian,
    /// `sigma(s) = s^q / (q - 1)`, `q > 1`.
    Power(T),
}

/// The Maxwellian generator.
pub fn maxwellian_generator<T: Real>() -> EntropyGenerator<T> {
    EntropyGenerator::Maxwellian
}

/// `sigma(s) = s^q / (q - 1)`; rejects `q <= 1`.
pub fn power_generator<T: Real>(q: T) -> Result<EntropyGenerator<T>> {
    if !(q > T::one()) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("power generator needs q > 1, got {q}")));
    }
    Ok(EntropyGenerator::Power(q))
}

impl<T: Real> EntropyGenerator<T> {
    pub fn sigma(&self, s: T) -> T {
        match *self {
            EntropyGenerator::Maxwellian => {
                if s == T::zero() {
                    T::zero()
                } else {
                    s * s.ln() - s
                }
            }
            EntropyGenerator::Power(q) => s.powf(q) / (q - T::one()),
        }
    }

    pub fn sigma_prime(&self, s: T) -> T {
        match *self {
            EntropyGenerator::Maxwellian => s.ln(),
            EntropyGenerator::Power(q) => q * s.powf(q - T::one()) / (q - T::one()),
        }
    }

    pub fn sigma_second(&self, s: T) -> T {
        match *self {
            EntropyGenerator::Maxwellian => T::one() / s,
            EntropyGenerator::Power(q) => q * s.powf(q - T::lit(2.0)),
        }
    }

    /// Generalised inverse of `-sigma'`, extended by 0.
    pub fn gamma(&self, y: T) -> T {
        match *self {
            EntropyGenerator::Maxwellian => (-y).exp(),
            EntropyGenerator::Power(q) => {
                let qm = q - T::one();
                (qm * (-y).max(T::zero()) / q).powf(T::one() / qm)
            }
        }
    }
}

/// Stationary state with prescribed mass.
#[derive(Debug, Clone)]
pub struct Equilibrium<T> {
    pub f_inf: DistSlice<T>,
    pub phi_inf: Vec<T>,
    pub alpha: T,
    pub mass: T,
    pub n_ext: Vec<T>,
    pub sigma: EntropyGenerator<T>,
    pub variant: ModelVariant,
    /// Picard sweeps used (0 for the homogeneous construction).
    pub sweeps: usize,
}

impl<T: Real> Equilibrium<T> {
    pub fn grid(&self) -> &PhaseGrid<T> {
        self.f_inf.grid()
    }

    /// `max |-D_x^2 Phi - (n_ext - n)|`.
    pub fn poisson_residual(&self) -> T {
        let g = self.grid();
        let n = moment(&self.f_inf, MomentKind::Density, self.variant);
        let dd = d1(&d1(&self.phi_inf, g.dx()), g.dx());
        (0..g.nx()).fold(T::zero(), |acc, j| acc.max((-dd[j] - (self.n_ext[j] - n[j])).abs()))
    }

    /// `|int int f_inf - M|`.
    pub fn mass_error(&self) -> T {
        (self.f_inf.mass() - self.mass).abs()
    }
}

/// `sum_i w_i gamma(kappa_i - shift)` for one `x` column.
fn column_density<T: Real>(gen: EntropyGenerator<T>, kap: &[T], w: &[T], shift: T) -> T {
    pairwise_sum_by(kap.len(), |i| w[i] * gen.gamma(kap[i] - shift))
}

/// Multiplier `alpha` with `dx sum_j n(x_j; Phi_j + alpha) = mass`, by bisection.
fn solve_alpha<T: Real>(
    gen: EntropyGenerator<T>,
    grid: &PhaseGrid<T>,
    kap: &[T],
    phi: &[T],
    mass: T,
) -> Result<T> {
    let w = grid.p_weights();
    let total = |alpha: T| -> T {
        grid.dx() * pairwise_sum_by(grid.nx(), |j| column_density(gen, kap, &w, phi[j] + alpha))
    };
    let mut lo = -T::one();
    let mut hi = T::one();
    let mut guard = 0;
    while total(lo) > mass {
        lo = lo + lo;
        guard += 1;
        if guard > 200 {
            return Err(Error::MassUnreachable { mass: mass.to_f64_lossy() });
        }
    }
    guard = 0;
    while total(hi) < mass {
        hi = hi + hi;
        guard += 1;
        if guard > 200 || !total(hi).is_finite() {
            return Err(Error::MassUnreachable { mass: mass.to_f64_lossy() });
        }
    }
    let tol = T::lit(ALPHA_TOLERANCE) * mass;
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        let m = total(mid);
        if (m - mass).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if m < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

fn build_f<T: Real>(
    gen: EntropyGenerator<T>,
    grid: &PhaseGrid<T>,
    kap: &[T],
    phi: &[T],
    alpha: T,
) -> Result<DistSlice<T>> {
    let np = grid.np();
    let mut values = Vec::with_capacity(grid.len());
    for &ph in phi {
        values.extend((0..np).map(|i| gen.gamma(kap[i] - ph - alpha)));
    }
    let f = DistSlice::new(*grid, values)?;
    // Compactly supported profiles must fit inside the momentum window; the
    // Maxwellian tail is left to the caller's support check.
    let bounded = matches!(gen, EntropyGenerator::Power(_));
    if bounded && !f.check_support(T::lit(DEFAULT_SUPPORT_TOLERANCE)).ok {
        return Err(Error::MassUnreachable {
            mass: f.mass().to_f64_lossy(),
        });
    }
    Ok(f)
}

/// Homogeneous equilibrium: `Phi = 0` and `alpha` fixed by the mass.
pub fn homogeneous_equilibrium<T: Real>(
    mass: T,
    grid: &PhaseGrid<T>,
    gen: EntropyGenerator<T>,
    variant: ModelVariant,
) -> Result<Equilibrium<T>> {
    if !(mass > T::zero()) {
        return Err(Error::InvalidArgument("mass must be positive".into()));
    }
    let kap: Vec<T> = grid.ps().iter().map(|&p| kappa(p, variant)).collect();
    let phi = vec![T::zero(); grid.nx()];
    let alpha = solve_alpha(gen, grid, &kap, &phi, mass)?;
    let f_inf = build_f(gen, grid, &kap, &phi, alpha)?;
    let nbar = mass / grid.length();
    Ok(Equilibrium {
        f_inf,
        phi_inf: phi,
        alpha,
        mass,
        n_ext: vec![nbar; grid.nx()],
        sigma: gen,
        variant,
        sweeps: 0,
    })
}

/// Self-consistent equilibrium in the confining background `n_ext` by damped
/// Picard iteration on the potential.
pub fn solve_equilibrium<T: Real>(
    mass: T,
    n_ext: &[T],
    grid: &PhaseGrid<T>,
    gen: EntropyGenerator<T>,
    variant: ModelVariant,
) -> Result<Equilibrium<T>> {
    if n_ext.len() != grid.nx() {
        return Err(Error::Shape {
            expected: grid.nx(),
            got: n_ext.len(),
        });
    }
    if n_ext.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::InvalidArgument("n_ext must be positive".into()));
    }
    let ext_mass = periodic_integral(n_ext, grid.dx());
    if (ext_mass - mass).abs() > T::lit(1e-8) * mass {
        return Err(Error::Neutrality {
            imbalance: (ext_mass - mass).to_f64_lossy(),
            tolerance: (T::lit(1e-8) * mass).to_f64_lossy(),
        });
    }
    let kap: Vec<T> = grid.ps().iter().map(|&p| kappa(p, variant)).collect();
    let w = grid.p_weights();
    let mut omega = T::lit(DEFAULT_DAMPING);
    let mut phi = vec![T::zero(); grid.nx()];
    let mut last_delta = T::infinity();
    for sweep in 1..=MAX_SWEEPS {
        let alpha = solve_alpha(gen, grid, &kap, &phi, mass)?;
        let n: Vec<T> = phi
            .par_iter()
            .map(|&ph| column_density(gen, &kap, &w, ph + alpha))
            .collect();
        let target = solve_potential(&n, n_ext, grid)?.phi;
        // undamped residual, so a shrunken omega cannot fake convergence
        let delta = phi
            .iter()
            .zip(&target)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
        if delta <= T::lit(PICARD_TOLERANCE) {
            phi = target;
            let alpha = solve_alpha(gen, grid, &kap, &phi, mass)?;
            let f_inf = build_f(gen, grid, &kap, &phi, alpha)?;
            return Ok(Equilibrium {
                f_inf,
                phi_inf: phi,
                alpha,
                mass,
                n_ext: n_ext.to_vec(),
                sigma: gen,
                variant,
                sweeps: sweep,
            });
        }
        for (a, &b) in phi.iter_mut().zip(&target) {
            *a = (T::one() - omega) * *a + omega * b;
        }
        if delta > last_delta {
            omega = omega * T::lit(0.5);
        }
        last_delta = delta;
    }
    Err(Error::NoConvergence {
        what: "equilibrium Picard iteration",
        iterations: MAX_SWEEPS,
        residual: last_delta.to_f64_lossy(),
    })
}

/// `max |vhat(p) D_x f + D_x Phi D_p f|` over interior momentum nodes `2..np-2`.
pub fn stationarity_residual<T: Real>(eq: &Equilibrium<T>) -> T {
    stationarity_residual_of(&eq.f_inf, &eq.phi_inf, eq.variant)
}

/// Same residual for an arbitrary `(f, Phi)` pair.
pub fn stationarity_residual_of<T: Real>(f: &DistSlice<T>, phi: &[T], variant: ModelVariant) -> T {
    let g = f.grid();
    let (nx, np) = (g.nx(), g.np());
    let dphi = d1(phi, g.dx());
    let ps = g.ps();
    let mut col = vec![T::zero(); nx];
    let mut worst = T::zero();
    for i in 2..np - 2 {
        for (j, c) in col.iter_mut().enumerate() {
            *c = f.get(j, i);
        }
        let dfx = d1(&col, g.dx());
        let v = vhat(ps[i], variant);
        for j in 0..nx {
            let dfp = d1_interior(|k| f.get(j, k), i, g.dp());
            worst = worst.max((v * dfx[j] + dphi[j] * dfp).abs());
        }
    }
    worst
}

/// How an equilibrium is perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// `f_inf (1 + eps cos(2 pi mode x / L))`, rescaled to the equilibrium mass.
    DensityMod,
    /// `f_inf + eps cos(2 pi mode x / L) C p exp(-p^2)` with
    /// `C = max f_inf sqrt(2e)`; leaves the density unchanged.
    OddP,
}

/// Perturbed initial state; fails with the largest admissible `eps` when the
/// result would be negative.
pub fn perturb<T: Real>(
    eq: &Equilibrium<T>,
    eps: T,
    mode: usize,
    kind: PerturbationKind,
) -> Result<DistSlice<T>> {
    let g = *eq.grid();
    let k = (T::PI() + T::PI()) * T::from_usize_lossy(mode) / g.length();
    let cosx: Vec<T> = g.xs().iter().map(|&x| (k * x).cos()).collect();
    let base = &eq.f_inf;
    if eps == T::zero() {
        return Ok(base.clone());
    }
    match kind {
        PerturbationKind::DensityMod => {
            let worst = cosx.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
            let max_eps = if worst > T::zero() { T::one() / worst } else { T::infinity() };
            if eps.abs() > max_eps {
                return Err(Error::NegativePerturbation {
                    max_eps: max_eps.to_f64_lossy(),
                });
            }
            let np = g.np();
            let values: Vec<T> = (0..g.len())
                .map(|idx| base.values()[idx] * (T::one() + eps * cosx[idx / np]))
                .collect();
            let f = DistSlice::new(g, values)?;
            let m = f.mass();
            Ok(if m > T::zero() { f.scaled(eq.mass / m) } else { f })
        }
        PerturbationKind::OddP => {
            let c = base.max_value() * (T::lit(2.0) * T::one().exp()).sqrt();
            let ps = g.ps();
            let mut max_eps = T::infinity();
            let mut values = Vec::with_capacity(g.len());
            for (j, &cx) in cosx.iter().enumerate() {
                for (i, &p) in ps.iter().enumerate() {
                    let shape = c * cx * p * (-(p * p)).exp();
                    let fv = base.get(j, i);
                    if shape != T::zero() {
                        max_eps = max_eps.min(fv / shape.abs());
                    }
                    values.push(fv + eps * shape);
                }
            }
            if eps.abs() > max_eps {
                return Err(Error::NegativePerturbation {
                    max_eps: max_eps.to_f64_lossy(),
                });
            }
            let values = values.into_iter().map(|v| v.max(T::zero())).collect();
            DistSlice::new(g, values)
        }
    }
}

/// One sample of a stability run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow<T> {
    pub t: T,
    /// `Sigma(f(t) | f_inf) + WT(t)`
    pub sigma_plus_wt: T,
    pub l1: T,
    pub l2: T,
    pub h1: T,
}

/// Time series of a stability run together with the underlying solve.
#[derive(Debug, Clone)]
pub struct StabilityReport<T> {
    pub rows: Vec<StabilityRow<T>>,
    pub outcome: SolveOutcome<T>,
}

/// Runs the solver from a perturbed equilibrium (optionally with a pump wave
/// `A0 = pump sin(2 pi x / L)`) and tracks the relative entropy plus transversal
/// energy and the distances to the equilibrium at every slice.
pub fn stability_experiment<T: Real>(
    eq: &Equilibrium<T>,
    eps: T,
    mode: usize,
    kind: PerturbationKind,
    pump: T,
    config: SolveConfig<T>,
) -> Result<StabilityReport<T>> {
    let g = *eq.grid();
    let f0 = perturb(eq, eps, mode, kind)?;
    let k = (T::PI() + T::PI()) / g.length();
    let a0: Vec<T> = g.xs().iter().map(|&x| pump * (k * x).sin()).collect();
    let adot0 = vec![T::zero(); g.nx()];
    let outcome = solve(f0, a0, adot0, eq.n_ext.clone(), eq.variant, config)?;
    let ctx = DiagnosticsContext::new(
        g,
        eq.n_ext.clone(),
        eq.variant,
        eq.sigma,
        Some(Reference {
            f: eq.f_inf.clone(),
            phi: eq.phi_inf.clone(),
        }),
    );
    let mut rows = Vec::new();
    for (w, win) in outcome.windows.iter().enumerate() {
        let first = if w == 0 { 0 } else { 1 };
        for s in first..=win.nt() {
            let f = &win.dist[s];
            let n = moment(f, MomentKind::Density, eq.variant);
            let pot = ctx.potential(&n);
            let rel = relative_entropy(f, &eq.f_inf, eq.sigma, eq.variant)?;
            let wt = transversal_energy(f, win.fields.a_at(s), win.fields.adot_at(s), win.fields.dxa_at(s));
            rows.push(StabilityRow {
                t: win.t_start + win.fields.time(s),
                sigma_plus_wt: rel + wt,
                l1: lp_distance(f, &eq.f_inf, 1)?,
                l2: lp_distance(f, &eq.f_inf, 2)?,
                h1: h1_distance(&pot.phi, &eq.phi_inf, &g)?,
            });
        }
    }
    Ok(StabilityReport { rows, outcome })
}

/// `sup |Phi|` of an equilibrium; zero for homogeneous states.
pub fn potential_amplitude<T: Real>(eq: &Equilibrium<T>) -> T {
    max_abs(&eq.phi_inf)
}
