//! Electrostatic initialisation, the Ampere update and the explicit wave
//! propagator for the vector potential.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::{PeriodicSpline, PeriodicSplineSolver};
use crate::phase_space::PhaseGrid;
use crate::quadrature::{cumulative_trapezoid, pairwise_sum, periodic_integral};
use crate::real::Real;
use crate::stencil::{d1, d2, d2_second_order};

/// Relative neutrality tolerance for `int (n_ext - n0) dx`.
pub const NEUTRALITY_TOLERANCE: f64 = 1e-8;

/// Right-hand side of the wave equation on `(nt + 1) x nx` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceHistory<T> {
    nx: usize,
    nt: usize,
    values: Vec<T>,
}

impl<T: Real> SourceHistory<T> {
    pub fn new(nx: usize, nt: usize, values: Vec<T>) -> Result<Self> {
        let expected = (nt + 1) * nx;
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { nx, nt, values })
    }

    pub fn zeros(nx: usize, nt: usize) -> Self {
        Self {
            nx,
            nt,
            values: vec![T::zero(); (nt + 1) * nx],
        }
    }

    /// `S = -n A`, the self-consistent source of the vector potential.
    pub fn from_density(n: &[T], a: &[T], nx: usize, nt: usize) -> Result<Self> {
        if n.len() != a.len() {
            return Err(Error::Shape {
                expected: a.len(),
                got: n.len(),
            });
        }
        Self::new(nx, nt, n.iter().zip(a).map(|(&n, &a)| -(n * a)).collect())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn slice(&self, s: usize) -> &[T] {
        &self.values[s * self.nx..(s + 1) * self.nx]
    }
}

fn check_neutral<T: Real>(n0: &[T], n_ext: &[T], dx: T) -> Result<()> {
    if n0.len() != n_ext.len() {
        return Err(Error::Shape {
            expected: n0.len(),
            got: n_ext.len(),
        });
    }
    let diff: Vec<T> = n_ext.iter().zip(n0).map(|(&a, &b)| a - b).collect();
    let imbalance = periodic_integral(&diff, dx).abs();
    let scale = periodic_integral(&n0.iter().map(|v| v.abs()).collect::<Vec<_>>(), dx)
        .max(periodic_integral(&n_ext.iter().map(|v| v.abs()).collect::<Vec<_>>(), dx));
    let tol = T::lit(NEUTRALITY_TOLERANCE) * scale;
    if imbalance > tol || !imbalance.is_finite() {
        return Err(Error::Neutrality {
            imbalance: imbalance.to_f64_lossy(),
            tolerance: tol.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Rejects data whose net charge `int (n_ext - n0)` exceeds the neutrality tolerance.
pub fn check_neutrality<T: Real>(n0: &[T], n_ext: &[T], grid: &PhaseGrid<T>) -> Result<()> {
    check_neutral(n0, n_ext, grid.dx())
}

/// `E0(x) = E0(0) - int_0^x (n0 - n_ext)`, in the zero-mean gauge.
///
/// The admissible residual imbalance is removed before integrating so that the
/// result is exactly periodic.
pub fn poisson_e0<T: Real>(n0: &[T], n_ext: &[T], grid: &PhaseGrid<T>) -> Result<Vec<T>> {
    let nx = grid.nx();
    if n0.len() != nx {
        return Err(Error::Shape {
            expected: nx,
            got: n0.len(),
        });
    }
    check_neutral(n0, n_ext, grid.dx())?;
    Ok(e0_from_density(n0, n_ext, grid))
}

/// Same construction as [`poisson_e0`] without the neutrality check: the mean
/// of `n0 - n_ext` is removed whatever its size. Used when restarting from a
/// transported slice whose mass carries interpolation error.
pub fn e0_from_density<T: Real>(n0: &[T], n_ext: &[T], grid: &PhaseGrid<T>) -> Vec<T> {
    let nx = grid.nx();
    let rho: Vec<T> = n0.iter().zip(n_ext).map(|(&a, &b)| a - b).collect();
    let mean = pairwise_sum(&rho) / T::from_usize_lossy(nx);
    let rho: Vec<T> = rho.iter().map(|&r| r - mean).collect();
    let mut e = cumulative_trapezoid(&rho, grid.dx());
    for v in &mut e {
        *v = -*v;
    }
    let e_mean = pairwise_sum(&e) / T::from_usize_lossy(nx);
    e.into_iter().map(|v| v - e_mean).collect()
}

/// `E[s] = E0 + int_0^{s dt} j`, cumulative trapezoid in time at every node.
pub fn ampere_history<T: Real>(e0: &[T], j_hist: &[T], nt: usize, dt: T) -> Result<Vec<T>> {
    let nx = e0.len();
    let expected = (nt + 1) * nx;
    if j_hist.len() != expected {
        return Err(Error::Shape {
            expected,
            got: j_hist.len(),
        });
    }
    let half = dt * T::lit(0.5);
    let mut e = Vec::with_capacity(expected);
    e.extend_from_slice(e0);
    for s in 1..=nt {
        for k in 0..nx {
            let prev = e[(s - 1) * nx + k];
            e.push(prev + half * (j_hist[(s - 1) * nx + k] + j_hist[s * nx + k]));
        }
    }
    Ok(e)
}

/// `A`, `dA/dt`, `dA/dx`, `d2A/dx2` on `(nt + 1) x nx` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveHistory<T> {
    pub a: Vec<T>,
    pub adot: Vec<T>,
    pub dxa: Vec<T>,
    pub dxxa: Vec<T>,
}

/// Solves `A_tt - A_xx = S` with the d'Alembert/Duhamel representation and its
/// differentiated forms.
///
/// Point values come from periodic cubic splines, cone integrals from the exact
/// antiderivative of the splines, spatial derivatives of the data from
/// fourth-order stencils and the time integral from the trapezoid rule over slices.
pub fn duhamel_history<T: Real>(
    grid: &PhaseGrid<T>,
    dt: T,
    a0: &[T],
    adot0: &[T],
    source: &SourceHistory<T>,
) -> Result<WaveHistory<T>> {
    let nx = grid.nx();
    let nt = source.nt();
    if source.nx() != nx {
        return Err(Error::Shape {
            expected: nx,
            got: source.nx(),
        });
    }
    for arr in [a0, adot0] {
        if arr.len() != nx {
            return Err(Error::Shape {
                expected: nx,
                got: arr.len(),
            });
        }
    }
    let h = grid.dx();
    let solver = PeriodicSplineSolver::new(nx);
    let spl = |v: &[T]| PeriodicSpline::new(&solver, h, v);
    let u0 = spl(a0);
    let u0p = spl(&d1(a0, h));
    let u0pp = spl(&d2(a0, h));
    let v0 = spl(adot0);
    let v0p = spl(&d1(adot0, h));
    let s_spl: Vec<PeriodicSpline<T>> = (0..=nt).map(|s| spl(source.slice(s))).collect();
    let sx_spl: Vec<PeriodicSpline<T>> = (0..=nt).map(|s| spl(&d1(source.slice(s), h))).collect();
    let half = T::lit(0.5);

    let slices: Vec<[Vec<T>; 4]> = (0..=nt)
        .into_par_iter()
        .map(|k| {
            let t = dt * T::from_usize_lossy(k);
            let mut out = [
                Vec::with_capacity(nx),
                Vec::with_capacity(nx),
                Vec::with_capacity(nx),
                Vec::with_capacity(nx),
            ];
            for j in 0..nx {
                let x = grid.x(j);
                let (xp, xm) = (x + t, x - t);
                let mut a = u0.eval(xp) + u0.eval(xm) + v0.integral(xm, xp);
                let mut adot = u0p.eval(xp) - u0p.eval(xm) + v0.eval(xp) + v0.eval(xm);
                let mut dxa = u0p.eval(xp) + u0p.eval(xm) + v0.eval(xp) - v0.eval(xm);
                let mut dxxa = u0pp.eval(xp) + u0pp.eval(xm) + v0p.eval(xp) - v0p.eval(xm);
                if k > 0 {
                    // trapezoid over s in [0, t]
                    let mut ia = Vec::with_capacity(k + 1);
                    let mut iadot = Vec::with_capacity(k + 1);
                    let mut idxa = Vec::with_capacity(k + 1);
                    let mut idxxa = Vec::with_capacity(k + 1);
                    for s in 0..=k {
                        let w = if s == 0 || s == k { dt * half } else { dt };
                        let r = dt * T::from_usize_lossy(k - s);
                        let (lo, hi) = (x - r, x + r);
                        let sl = s_spl[s].eval(lo);
                        let sh = s_spl[s].eval(hi);
                        ia.push(w * s_spl[s].integral(lo, hi));
                        iadot.push(w * (sl + sh));
                        idxa.push(w * (sh - sl));
                        idxxa.push(w * (sx_spl[s].eval(hi) - sx_spl[s].eval(lo)));
                    }
                    a = a + pairwise_sum(&ia);
                    adot = adot + pairwise_sum(&iadot);
                    dxa = dxa + pairwise_sum(&idxa);
                    dxxa = dxxa + pairwise_sum(&idxxa);
                }
                out[0].push(half * a);
                out[1].push(half * adot);
                out[2].push(half * dxa);
                out[3].push(half * dxxa);
            }
            out
        })
        .collect();

    let mut hist = WaveHistory {
        a: Vec::with_capacity((nt + 1) * nx),
        adot: Vec::with_capacity((nt + 1) * nx),
        dxa: Vec::with_capacity((nt + 1) * nx),
        dxxa: Vec::with_capacity((nt + 1) * nx),
    };
    for [a, adot, dxa, dxxa] in slices {
        hist.a.extend(a);
        hist.adot.extend(adot);
        hist.dxa.extend(dxa);
        hist.dxxa.extend(dxxa);
    }
    Ok(hist)
}

/// Second-order leapfrog solution of `A_tt - A_xx = S`; requires `dt <= dx`.
pub fn leapfrog_wave_oracle<T: Real>(
    grid: &PhaseGrid<T>,
    dt: T,
    a0: &[T],
    adot0: &[T],
    source: &SourceHistory<T>,
) -> Result<Vec<T>> {
    let nx = grid.nx();
    let nt = source.nt();
    let h = grid.dx();
    if dt > h {
        return Err(Error::Cfl {
            dt: dt.to_f64_lossy(),
            dx: h.to_f64_lossy(),
        });
    }
    if a0.len() != nx || adot0.len() != nx || source.nx() != nx {
        return Err(Error::Shape {
            expected: nx,
            got: a0.len().min(adot0.len()).min(source.nx()),
        });
    }
    let dt2 = dt * dt;
    let mut out = Vec::with_capacity((nt + 1) * nx);
    out.extend_from_slice(a0);
    let lap0 = d2_second_order(a0, h);
    let s0 = source.slice(0);
    let a1: Vec<T> = (0..nx)
        .map(|k| a0[k] + dt * adot0[k] + T::lit(0.5) * dt2 * (lap0[k] + s0[k]))
        .collect();
    out.extend_from_slice(&a1);
    let mut prev = a0.to_vec();
    let mut cur = a1;
    for s in 1..nt {
        let lap = d2_second_order(&cur, h);
        let src = source.slice(s);
        let next: Vec<T> = (0..nx)
            .map(|k| cur[k] + cur[k] - prev[k] + dt2 * (lap[k] + src[k]))
            .collect();
        out.extend_from_slice(&next);
        prev = cur;
        cur = next;
    }
    out.truncate((nt + 1) * nx);
    Ok(out)
}

/// `max_j |D_x E - (n_ext - n)|` with the fourth-order periodic derivative.
pub fn gauss_residual<T: Real>(e: &[T], n: &[T], n_ext: &[T], grid: &PhaseGrid<T>) -> T {
    let de = d1(e, grid.dx());
    (0..e.len()).fold(T::zero(), |acc, k| acc.max((de[k] - (n_ext[k] - n[k])).abs()))
}

/// `1/2 int (Adot^2 + (dA/dx)^2) dx` on one slice.
pub fn wave_energy<T: Real>(adot: &[T], dxa: &[T], dx: T) -> T {
    let v: Vec<T> = adot.iter().zip(dxa).map(|(&a, &b)| a * a + b * b).collect();
    T::lit(0.5) * periodic_integral(&v, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::max_abs_diff;
    use std::f64::consts::PI;

    fn grid(nx: usize) -> PhaseGrid<f64> {
        PhaseGrid::new(2.0 * PI, nx, 6.0, 33).unwrap()
    }

    #[test]
    fn e0_examples() {
        let g = grid(64);
        let ones = vec![1.0; 64];
        let e = poisson_e0(&ones, &ones, &g).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
        let eps = 0.1;
        let n0: Vec<f64> = g.xs().iter().map(|x| 1.0 + eps * x.cos()).collect();
        let e = poisson_e0(&n0, &ones, &g).unwrap();
        let exact: Vec<f64> = g.xs().iter().map(|x| -eps * x.sin()).collect();
        let err = max_abs_diff(&e, &exact);
        assert!(err < eps * g.dx() * g.dx(), "err {err}");
        let bad: Vec<f64> = n0.iter().map(|v| v + 1e-3).collect();
        assert!(matches!(poisson_e0(&bad, &ones, &g), Err(Error::Neutrality { .. })));
        let res0 = gauss_residual(&e, &n0, &ones, &g);
        assert!(res0 < 10.0 * eps * g.dx() * g.dx());
        assert!(gauss_residual(&vec![0.0; 64], &ones, &ones, &g) == 0.0);
    }

    #[test]
    fn ampere_examples() {
        let e0 = vec![0.5, -0.5, 1.0];
        let nt = 10;
        let dt = 0.1;
        let e = ampere_history(&e0, &vec![0.0; 33], nt, dt).unwrap();
        assert!((0..=nt).all(|s| e[s * 3..s * 3 + 3] == e0[..]));
        let e = ampere_history(&e0, &vec![2.0; 33], nt, dt).unwrap();
        for s in 0..=nt {
            assert!((e[s * 3] - (0.5 + 2.0 * s as f64 * dt)).abs() < 1e-14);
        }
        let nt = 100;
        let dt = 0.01;
        let j: Vec<f64> = (0..=nt).flat_map(|s| vec![(s as f64 * dt).sin(); 3]).collect();
        let e = ampere_history(&[0.0; 3], &j, nt, dt).unwrap();
        assert!((e[nt * 3] - (1.0 - 1f64.cos())).abs() < dt * dt);
    }

    #[test]
    fn free_wave_and_simple_sources() {
        let g = grid(64);
        let nt = 64;
        let dt = 1.0 / 64.0;
        let a0: Vec<f64> = g.xs().iter().map(|x| x.sin()).collect();
        let zero = vec![0.0; 64];
        let w = duhamel_history(&g, dt, &a0, &zero, &SourceHistory::zeros(64, nt)).unwrap();
        let mut err: f64 = 0.0;
        for s in 0..=nt {
            let t = s as f64 * dt;
            for (j, x) in g.xs().iter().enumerate() {
                err = err.max((w.a[s * 64 + j] - x.sin() * t.cos()).abs());
                err = err.max((w.adot[s * 64 + j] + x.sin() * t.sin()).abs());
                err = err.max((w.dxa[s * 64 + j] - x.cos() * t.cos()).abs());
                err = err.max((w.dxxa[s * 64 + j] + x.sin() * t.cos()).abs());
            }
        }
        assert!(err < 1e-5, "free wave err {err}");

        let ones = vec![1.0; 64];
        let w = duhamel_history(&g, dt, &zero, &ones, &SourceHistory::zeros(64, nt)).unwrap();
        for s in 0..=nt {
            assert!((w.a[s * 64 + 5] - s as f64 * dt).abs() < 1e-13);
        }
        let src = SourceHistory::new(64, nt, vec![1.0; 65 * 64]).unwrap();
        let w = duhamel_history(&g, dt, &zero, &zero, &src).unwrap();
        for s in 0..=nt {
            let t = s as f64 * dt;
            assert!((w.a[s * 64 + 7] - t * t / 2.0).abs() < 1e-12);
            assert!((w.adot[s * 64 + 7] - t).abs() < 1e-12);
        }
        let lf = leapfrog_wave_oracle(&g, dt, &zero, &zero, &src).unwrap();
        assert!((lf[nt * 64] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn leapfrog_rejects_cfl_violation() {
        let g = grid(16);
        let z = vec![0.0; 16];
        let r = leapfrog_wave_oracle(&g, 0.5, &z, &z, &SourceHistory::zeros(16, 2));
        assert!(matches!(r, Err(Error::Cfl { .. })));
    }

    #[test]
    fn derivative_paths_agree() {
        let g = grid(64);
        let nt = 32;
        let dt = 1.0 / 32.0;
        let a0: Vec<f64> = g.xs().iter().map(|x| (x.sin()).exp() - 1.0).collect();
        let v0: Vec<f64> = g.xs().iter().map(|x| 0.3 * (2.0 * x).cos()).collect();
        let s: Vec<f64> = (0..=nt)
            .flat_map(|k| g.xs().iter().map(move |x| (x + k as f64 * dt).cos() * 0.5).collect::<Vec<_>>())
            .collect();
        let w = duhamel_history(&g, dt, &a0, &v0, &SourceHistory::new(64, nt, s).unwrap()).unwrap();
        for k in 0..=nt {
            let r = k * 64..(k + 1) * 64;
            let dx = d1(&w.a[r.clone()], g.dx());
            assert!(max_abs_diff(&dx, &w.dxa[r.clone()]) < 1e-3);
            let dxx = d1(&w.dxa[r.clone()], g.dx());
            assert!(max_abs_diff(&dxx, &w.dxxa[r]) < 1e-3);
        }
    }
}
