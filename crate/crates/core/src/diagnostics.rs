//! Conserved functionals, residuals and distances evaluated on stored states.

use crate::equilibria::EntropyGenerator;
use crate::error::{Error, Result};
use crate::fields::check_neutrality;
use crate::phase_space::{kappa, moment, DistSlice, ModelVariant, MomentKind, PhaseGrid};
use crate::quadrature::{pairwise_sum, pairwise_sum_by, periodic_integral};
use crate::real::Real;
use crate::stencil::{d1, PeriodicPoisson};

/// Values of `f` below this are treated as exact zeros in `sigma(f)`.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Electrostatic potential with its normalisation status.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<T> {
    pub phi: Vec<T>,
    /// `true` when `int Phi n_ext = 0` holds; `false` means the zero-mean
    /// fallback was used because `n_ext` integrates to zero.
    pub normalized: bool,
    /// `int (n_ext - n) dx` that was discarded before solving.
    pub imbalance: T,
}

/// Solves `-D_x^2 Phi = n_ext - n` and normalises `int Phi n_ext = 0`.
///
/// `D_x` is the fourth-order periodic difference, so the discrete
/// integration by parts between the two longitudinal energy forms is exact.
pub fn solve_potential<T: Real>(n: &[T], n_ext: &[T], grid: &PhaseGrid<T>) -> Result<Potential<T>> {
    check_neutrality(n, n_ext, grid)?;
    Ok(potential_unchecked(n, n_ext, grid, &PeriodicPoisson::new(grid.nx(), grid.dx())))
}

/// [`solve_potential`] without the neutrality check: any net charge is dropped
/// (reported in `imbalance`). Used on transported slices whose mass carries
/// interpolation error.
pub fn potential_unchecked<T: Real>(
    n: &[T],
    n_ext: &[T],
    grid: &PhaseGrid<T>,
    poisson: &PeriodicPoisson<T>,
) -> Potential<T> {
    let dx = grid.dx();
    let rhs: Vec<T> = n_ext.iter().zip(n).map(|(&a, &b)| a - b).collect();
    let imbalance = periodic_integral(&rhs, dx);
    let mut phi = poisson.solve(&rhs);
    let ext_mass = periodic_integral(n_ext, dx);
    let normalized = ext_mass.abs() > T::zero();
    if normalized {
        let prod: Vec<T> = phi.iter().zip(n_ext).map(|(&a, &b)| a * b).collect();
        let c = periodic_integral(&prod, dx) / ext_mass;
        for v in &mut phi {
            *v = *v - c;
        }
    }
    Potential {
        phi,
        normalized,
        imbalance,
    }
}

fn x_integral<T: Real>(values: &[T], grid: &PhaseGrid<T>) -> T {
    periodic_integral(values, grid.dx())
}

/// `int int h(x_j, p_i, f_ji)` with trapezoid in `p` and the periodic rule in `x`.
fn phase_integral<T: Real>(grid: &PhaseGrid<T>, h: impl Fn(usize, usize) -> T) -> T {
    let w = grid.p_weights();
    let np = grid.np();
    let rows: Vec<T> = (0..grid.nx())
        .map(|j| pairwise_sum_by(np, |i| w[i] * h(j, i)))
        .collect();
    grid.dx() * pairwise_sum(&rows)
}

/// `1/2 int (n A^2 + (dA/dx)^2 + Adot^2) dx`.
pub fn transversal_energy<T: Real>(f: &DistSlice<T>, a: &[T], adot: &[T], dxa: &[T]) -> T {
    let n = moment(f, MomentKind::QuasiDensity, ModelVariant::Qr);
    transversal_energy_from_density(&n, a, adot, dxa, f.grid())
}

fn transversal_energy_from_density<T: Real>(
    n: &[T],
    a: &[T],
    adot: &[T],
    dxa: &[T],
    grid: &PhaseGrid<T>,
) -> T {
    let v: Vec<T> = (0..n.len())
        .map(|k| n[k] * a[k] * a[k] + dxa[k] * dxa[k] + adot[k] * adot[k])
        .collect();
    T::lit(0.5) * x_integral(&v, grid)
}

/// `int int kappa(p) f`.
pub fn kinetic_energy<T: Real>(f: &DistSlice<T>, variant: ModelVariant) -> T {
    let grid = f.grid();
    let k: Vec<T> = grid.ps().iter().map(|&p| kappa(p, variant)).collect();
    phase_integral(grid, |j, i| k[i] * f.get(j, i))
}

fn wl_forms<T: Real>(kin: T, n: &[T], pot: &Potential<T>, grid: &PhaseGrid<T>) -> (T, T) {
    let phin: Vec<T> = pot.phi.iter().zip(n).map(|(&a, &b)| a * b).collect();
    let dphi = d1(&pot.phi, grid.dx());
    let sq: Vec<T> = dphi.iter().map(|&v| v * v).collect();
    let half = T::lit(0.5);
    (
        kin - half * x_integral(&phin, grid),
        kin + half * x_integral(&sq, grid),
    )
}

/// `(int int (kappa - Phi/2) f, int int kappa f + 1/2 int |D_x Phi|^2)`.
pub fn longitudinal_energy<T: Real>(
    f: &DistSlice<T>,
    n_ext: &[T],
    variant: ModelVariant,
) -> Result<(T, T)> {
    let grid = f.grid();
    let n = moment(f, MomentKind::Density, variant);
    let pot = solve_potential(&n, n_ext, grid)?;
    Ok(wl_forms(kinetic_energy(f, variant), &n, &pot, grid))
}

/// `WT + WL` (second form).
pub fn total_energy<T: Real>(
    f: &DistSlice<T>,
    a: &[T],
    adot: &[T],
    dxa: &[T],
    n_ext: &[T],
    variant: ModelVariant,
) -> Result<T> {
    let (_, wl) = longitudinal_energy(f, n_ext, variant)?;
    Ok(transversal_energy(f, a, adot, dxa) + wl)
}

/// Fully relativistic energy functional
/// `int int (sqrt(1 + p^2 + A^2) - Phi/2) f + 1/2 int (Adot^2 + (dA/dx)^2)`.
pub fn fr_energy<T: Real>(
    f: &DistSlice<T>,
    a: &[T],
    adot: &[T],
    dxa: &[T],
    n_ext: &[T],
) -> Result<T> {
    let grid = f.grid();
    let n = moment(f, MomentKind::Density, ModelVariant::Qr);
    let pot = solve_potential(&n, n_ext, grid)?;
    let ps = grid.ps();
    let kin = phase_integral(grid, |j, i| {
        (T::one() + ps[i] * ps[i] + a[j] * a[j]).sqrt() * f.get(j, i)
    });
    let phin: Vec<T> = pot.phi.iter().zip(&n).map(|(&a, &b)| a * b).collect();
    let wave: Vec<T> = adot.iter().zip(dxa).map(|(&u, &v)| u * u + v * v).collect();
    let half = T::lit(0.5);
    Ok(kin - half * x_integral(&phin, grid) + half * x_integral(&wave, grid))
}

/// `int int sigma(f)`.
pub fn entropy<T: Real>(f: &DistSlice<T>, sigma: EntropyGenerator<T>) -> T {
    let floor = T::lit(ENTROPY_FLOOR);
    let s0 = sigma.sigma(T::zero());
    phase_integral(f.grid(), |j, i| {
        let v = f.get(j, i);
        if v < floor {
            s0
        } else {
            sigma.sigma(v)
        }
    })
}

fn bregman<T: Real>(f: &DistSlice<T>, g: &DistSlice<T>, sigma: EntropyGenerator<T>) -> Result<T> {
    let floor = T::lit(ENTROPY_FLOOR);
    let grid = f.grid();
    let s0 = sigma.sigma(T::zero());
    let singular = !sigma.sigma_prime(T::zero()).is_finite();
    for j in 0..grid.nx() {
        for i in 0..grid.np() {
            if singular && g.get(j, i) < floor && f.get(j, i) >= floor {
                return Err(Error::SingularReference {
                    x_index: j,
                    p_index: i,
                });
            }
        }
    }
    Ok(phase_integral(grid, |j, i| {
        let (fv, gv) = (f.get(j, i), g.get(j, i));
        if gv < floor {
            // f vanishes here too whenever sigma'(0) is singular
            let sf = if fv < floor { s0 } else { sigma.sigma(fv) };
            if singular {
                T::zero()
            } else {
                sf - s0 - sigma.sigma_prime(T::zero()) * fv
            }
        } else {
            let sf = if fv < floor { s0 } else { sigma.sigma(fv) };
            sf - sigma.sigma(gv) - sigma.sigma_prime(gv) * (fv - gv)
        }
    }))
}

/// `1/2 int |D_x Phi[f - g]|^2` with `-D_x^2 Phi[f - g] = n_g - n_f`.
fn field_distance<T: Real>(nf: &[T], ng: &[T], grid: &PhaseGrid<T>, poisson: &PeriodicPoisson<T>) -> T {
    let rhs: Vec<T> = ng.iter().zip(nf).map(|(&a, &b)| a - b).collect();
    let phi = poisson.solve(&rhs);
    let dphi = d1(&phi, grid.dx());
    let sq: Vec<T> = dphi.iter().map(|&v| v * v).collect();
    T::lit(0.5) * x_integral(&sq, grid)
}

/// Relative entropy: Bregman divergence of `sigma` plus the field term
/// `1/2 int |D_x Phi[f - g]|^2`.
pub fn relative_entropy<T: Real>(
    f: &DistSlice<T>,
    f_ref: &DistSlice<T>,
    sigma: EntropyGenerator<T>,
    variant: ModelVariant,
) -> Result<T> {
    let grid = f.grid();
    if grid != f_ref.grid() {
        return Err(Error::InvalidArgument("distributions live on different grids".into()));
    }
    let b = bregman(f, f_ref, sigma)?;
    let nf = moment(f, MomentKind::Density, variant);
    let ng = moment(f_ref, MomentKind::Density, variant);
    let poisson = PeriodicPoisson::new(grid.nx(), grid.dx());
    Ok(b + field_distance(&nf, &ng, grid, &poisson))
}

/// Continuity residual `|dn/dt + D_x j|` per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityResidual<T> {
    /// Centred in time at interior slices, one-sided at the two ends.
    pub per_slice: Vec<T>,
    /// Maximum over interior slices only (zero when there are none).
    pub max_interior: T,
}

/// Residual of `dn/dt + dj/dx = 0` on `(nt + 1) x nx` histories.
pub fn continuity_residual<T: Real>(
    n_hist: &[T],
    j_hist: &[T],
    dt: T,
    grid: &PhaseGrid<T>,
) -> Result<ContinuityResidual<T>> {
    let nx = grid.nx();
    if n_hist.len() != j_hist.len() || n_hist.len() % nx != 0 || n_hist.len() < 2 * nx {
        return Err(Error::Shape {
            expected: j_hist.len(),
            got: n_hist.len(),
        });
    }
    let nt = n_hist.len() / nx - 1;
    let slice = |v: &'_ [T], s: usize| -> Vec<T> { v[s * nx..(s + 1) * nx].to_vec() };
    let mut per_slice = Vec::with_capacity(nt + 1);
    let mut max_interior = T::zero();
    for s in 0..=nt {
        let (a, b, span) = if s == 0 {
            (0, 1, dt)
        } else if s == nt {
            (nt - 1, nt, dt)
        } else {
            (s - 1, s + 1, dt + dt)
        };
        let na = slice(n_hist, a);
        let nb = slice(n_hist, b);
        let dj = d1(&slice(j_hist, s), grid.dx());
        let r = (0..nx).fold(T::zero(), |acc, k| acc.max(((nb[k] - na[k]) / span + dj[k]).abs()));
        if s > 0 && s < nt {
            max_interior = max_interior.max(r);
        }
        per_slice.push(r);
    }
    Ok(ContinuityResidual {
        per_slice,
        max_interior,
    })
}

/// `(int int |f - g|^q)^{1/q}` for `q` in `{1, 2}`.
pub fn lp_distance<T: Real>(f: &DistSlice<T>, g: &DistSlice<T>, q: u32) -> Result<T> {
    if f.grid() != g.grid() {
        return Err(Error::InvalidArgument("distributions live on different grids".into()));
    }
    match q {
        1 => Ok(phase_integral(f.grid(), |j, i| (f.get(j, i) - g.get(j, i)).abs())),
        2 => Ok(phase_integral(f.grid(), |j, i| {
            let d = f.get(j, i) - g.get(j, i);
            d * d
        })
        .sqrt()),
        _ => Err(Error::InvalidArgument(format!("only q = 1 or 2 supported, got {q}"))),
    }
}

/// `sqrt(||u||_2^2 + ||D_x u||_2^2)` for `u = phi - phi_ref`.
pub fn h1_distance<T: Real>(phi: &[T], phi_ref: &[T], grid: &PhaseGrid<T>) -> Result<T> {
    if phi.len() != grid.nx() || phi_ref.len() != grid.nx() {
        return Err(Error::Shape {
            expected: grid.nx(),
            got: phi.len().min(phi_ref.len()),
        });
    }
    let u: Vec<T> = phi.iter().zip(phi_ref).map(|(&a, &b)| a - b).collect();
    let du = d1(&u, grid.dx());
    let v: Vec<T> = u.iter().zip(&du).map(|(&a, &b)| a * a + b * b).collect();
    Ok(x_integral(&v, grid).sqrt())
}

/// One line of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow<T> {
    pub t: T,
    pub mass: T,
    pub wt: T,
    pub wl_form1: T,
    pub wl_form2: T,
    pub w_total: T,
    pub s_sigma: T,
    pub kt_sigma: T,
    pub relative_entropy: Option<T>,
    pub gauss_residual: T,
    pub continuity_residual: T,
    pub sup_dxxa: T,
    pub l1_dist: Option<T>,
    pub l2_dist: Option<T>,
    pub h1_phi_dist: Option<T>,
}

impl<T: Real> DiagnosticsRow<T> {
    pub const HEADER: &'static str = "t,mass,WT,WL_form1,WL_form2,W_total,S_sigma,KT_sigma,relative_entropy,gauss_residual,continuity_residual,sup_dxxA,l1_dist,l2_dist,h1_phi_dist";

    /// Values with `{:e}` formatting (shortest round-trip); missing entries are empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<T>| v.map(|x| format!("{:e}", x.to_f64_lossy())).unwrap_or_default();
        let f = |x: T| format!("{:e}", x.to_f64_lossy());
        [
            f(self.t),
            f(self.mass),
            f(self.wt),
            f(self.wl_form1),
            f(self.wl_form2),
            f(self.w_total),
            f(self.s_sigma),
            f(self.kt_sigma),
            opt(self.relative_entropy),
            f(self.gauss_residual),
            f(self.continuity_residual),
            f(self.sup_dxxa),
            opt(self.l1_dist),
            opt(self.l2_dist),
            opt(self.h1_phi_dist),
        ]
        .join(",")
    }
}

/// Reference state for the stability columns.
#[derive(Debug, Clone)]
pub struct Reference<T> {
    pub f: DistSlice<T>,
    pub phi: Vec<T>,
}

/// Fields of one slice handed to [`DiagnosticsContext::row`].
#[derive(Debug, Clone, Copy)]
pub struct SliceState<'a, T> {
    pub t: T,
    pub f: &'a DistSlice<T>,
    pub e: &'a [T],
    pub a: &'a [T],
    pub adot: &'a [T],
    pub dxa: &'a [T],
    pub dxxa: &'a [T],
}

/// Everything that stays fixed while diagnostics rows are produced for a run.
#[derive(Debug, Clone)]
pub struct DiagnosticsContext<T: Real> {
    grid: PhaseGrid<T>,
    n_ext: Vec<T>,
    variant: ModelVariant,
    sigma: EntropyGenerator<T>,
    poisson: PeriodicPoisson<T>,
    reference: Option<Reference<T>>,
}

impl<T: Real> DiagnosticsContext<T> {
    pub fn new(
        grid: PhaseGrid<T>,
        n_ext: Vec<T>,
        variant: ModelVariant,
        sigma: EntropyGenerator<T>,
        reference: Option<Reference<T>>,
    ) -> Self {
        Self {
            poisson: PeriodicPoisson::new(grid.nx(), grid.dx()),
            grid,
            n_ext,
            variant,
            sigma,
            reference,
        }
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }

    /// Potential of a density, tolerant to small net charge.
    pub fn potential(&self, n: &[T]) -> Potential<T> {
        potential_unchecked(n, &self.n_ext, &self.grid, &self.poisson)
    }

    /// Diagnostics of one slice; `continuity` is supplied by the caller, which
    /// owns the time history.
    pub fn row(&self, state: SliceState<'_, T>, continuity: T) -> Result<DiagnosticsRow<T>> {
        let grid = &self.grid;
        let f = state.f;
        let n = moment(f, MomentKind::Density, self.variant);
        let mass = x_integral(&n, grid);
        let pot = self.potential(&n);
        let kin = kinetic_energy(f, self.variant);
        let (wl1, wl2) = wl_forms(kin, &n, &pot, grid);
        let wt = transversal_energy_from_density(&n, state.a, state.adot, state.dxa, grid);
        let s = entropy(f, self.sigma);
        let gauss = crate::fields::gauss_residual(state.e, &n, &self.n_ext, grid);
        let sup_dxxa = crate::real::max_abs(state.dxxa);
        let (rel, l1, l2, h1) = match &self.reference {
            Some(r) => {
                let nr = moment(&r.f, MomentKind::Density, self.variant);
                let rel = bregman(f, &r.f, self.sigma)? + field_distance(&n, &nr, grid, &self.poisson);
                (
                    Some(rel),
                    Some(lp_distance(f, &r.f, 1)?),
                    Some(lp_distance(f, &r.f, 2)?),
                    Some(h1_distance(&pot.phi, &r.phi, grid)?),
                )
            }
            None => (None, None, None, None),
        };
        Ok(DiagnosticsRow {
            t: state.t,
            mass,
            wt,
            wl_form1: wl1,
            wl_form2: wl2,
            w_total: wt + wl2,
            s_sigma: s,
            kt_sigma: wl2 + s + wt,
            relative_entropy: rel,
            gauss_residual: gauss,
            continuity_residual: continuity,
            sup_dxxa,
            l1_dist: l1,
            l2_dist: l2,
            h1_phi_dist: h1,
        })
    }
}
