//! Cubic B-spline interpolation on uniform grids.
//!
//! Periodic splines back every off-grid field evaluation (force sampler,
//! d'Alembert point values, cone integrals). The tensor-product interpolant
//! used to evaluate `f0` at characteristic feet is periodic in `x` and
//! clamped (zero end slope) in `p`, and vanishes outside the momentum box.

use crate::real::Real;

/// Cached Thomas factorisation of a tridiagonal matrix.
#[derive(Debug, Clone)]
struct Tridiagonal<T> {
    sub: Vec<T>,
    // modified super diagonal c'_i and reciprocal pivots from the forward sweep
    cprime: Vec<T>,
    inv_pivot: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    fn new(sub: Vec<T>, diag: Vec<T>, sup: Vec<T>) -> Self {
        let n = diag.len();
        let mut cprime = vec![T::zero(); n];
        let mut inv_pivot = vec![T::zero(); n];
        let mut prev_c = T::zero();
        for i in 0..n {
            let pivot = if i == 0 { diag[0] } else { diag[i] - sub[i] * prev_c };
            inv_pivot[i] = T::one() / pivot;
            cprime[i] = if i + 1 < n { sup[i] * inv_pivot[i] } else { T::zero() };
            prev_c = cprime[i];
        }
        Self { sub, cprime, inv_pivot }
    }

    fn solve_in_place(&self, rhs: &mut [T]) {
        let n = rhs.len();
        rhs[0] = rhs[0] * self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] = rhs[i] - self.cprime[i] * rhs[i + 1];
        }
    }
}

/// Solver for the cyclic system `(c[j-1] + 4 c[j] + c[j+1]) / 6 = f[j]`.
#[derive(Debug, Clone)]
pub struct PeriodicSplineSolver<T> {
    n: usize,
    tri: Tridiagonal<T>,
    z: Vec<T>,
    gamma: T,
    denom: T,
}

impl<T: Real> PeriodicSplineSolver<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "periodic spline needs at least 3 nodes");
        let one = T::one();
        let four = T::lit(4.0);
        // Sherman-Morrison split of the corner entries (both equal to one).
        let gamma = -four;
        let mut diag = vec![four; n];
        diag[0] = four - gamma;
        diag[n - 1] = four - one / gamma;
        let tri = Tridiagonal::new(vec![one; n], diag, vec![one; n]);
        let mut z = vec![T::zero(); n];
        z[0] = gamma;
        z[n - 1] = one;
        tri.solve_in_place(&mut z);
        let denom = one + z[0] + z[n - 1] / gamma;
        Self {
            n,
            tri,
            z,
            gamma,
            denom,
        }
    }

    /// B-spline coefficients interpolating `values` at the nodes.
    pub fn coefficients(&self, values: &[T]) -> Vec<T> {
        assert_eq!(values.len(), self.n);
        let six = T::lit(6.0);
        let mut x: Vec<T> = values.iter().map(|&v| v * six).collect();
        self.tri.solve_in_place(&mut x);
        let fact = (x[0] + x[self.n - 1] / self.gamma) / self.denom;
        for (xi, &zi) in x.iter_mut().zip(&self.z) {
            *xi = *xi - fact * zi;
        }
        x
    }
}

#[inline]
fn basis<T: Real>(t: T) -> [T; 4] {
    let one = T::one();
    let sixth = T::one() / T::lit(6.0);
    let s = one - t;
    let t2 = t * t;
    let t3 = t2 * t;
    [
        s * s * s * sixth,
        (T::lit(3.0) * t3 - T::lit(6.0) * t2 + T::lit(4.0)) * sixth,
        (T::lit(-3.0) * t3 + T::lit(3.0) * t2 + T::lit(3.0) * t + one) * sixth,
        t3 * sixth,
    ]
}

#[inline]
fn basis_deriv<T: Real>(t: T) -> [T; 4] {
    let half = T::lit(0.5);
    let s = T::one() - t;
    let t2 = t * t;
    [
        -s * s * half,
        (T::lit(3.0) * t2 - T::lit(4.0) * t) * half,
        (T::lit(-3.0) * t2 + T::lit(2.0) * t + T::one()) * half,
        t2 * half,
    ]
}

#[inline]
fn basis_integral<T: Real>(tau: T) -> [T; 4] {
    let s = T::one() - tau;
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let inv24 = T::one() / T::lit(24.0);
    let inv6 = T::one() / T::lit(6.0);
    let q = T::lit(0.75);
    [
        (T::one() - s * s * s * s) * inv24,
        (q * t4 - T::lit(2.0) * t3 + T::lit(4.0) * tau) * inv6,
        (-q * t4 + t3 + T::lit(1.5) * t2 + tau) * inv6,
        t4 * inv24,
    ]
}

/// Periodic cubic spline through `n` equispaced samples of period `n * h`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline<T> {
    n: usize,
    h: T,
    inv_h: T,
    // coefficients with one ghost on the left and two on the right
    ext: Vec<T>,
    // prefix[k] = integral of the spline over [0, x_k]
    prefix: Vec<T>,
}

impl<T: Real> PeriodicSpline<T> {
    pub fn new(solver: &PeriodicSplineSolver<T>, h: T, values: &[T]) -> Self {
        let n = values.len();
        let c = solver.coefficients(values);
        let mut ext = Vec::with_capacity(n + 3);
        ext.push(c[n - 1]);
        ext.extend_from_slice(&c);
        ext.push(c[0]);
        ext.push(c[1 % n]);
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = T::zero();
        prefix.push(acc);
        let w_out = h / T::lit(24.0);
        let eleven = T::lit(11.0);
        for k in 0..n {
            let cell = w_out * (ext[k] + eleven * ext[k + 1] + eleven * ext[k + 2] + ext[k + 3]);
            acc = acc + cell;
            prefix.push(acc);
        }
        Self {
            n,
            h,
            inv_h: T::one() / h,
            ext,
            prefix,
        }
    }

    pub fn period(&self) -> T {
        self.h * T::from_usize_lossy(self.n)
    }

    /// Returns `(cell index in 0..n, local coordinate in [0,1), number of whole periods)`.
    #[inline]
    fn locate(&self, x: T) -> (usize, T, T) {
        let u = x * self.inv_h;
        let fl = u.floor();
        let t = u - fl;
        let n = self.n as i64;
        let k = fl.to_i64().unwrap_or(0);
        let periods = k.div_euclid(n);
        let cell = k.rem_euclid(n) as usize;
        (cell, t, T::from_i64(periods).unwrap_or_else(T::zero))
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        let (k, t, _) = self.locate(x);
        let b = basis(t);
        let c = &self.ext[k..k + 4];
        c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + c[3] * b[3]
    }

    #[inline]
    pub fn deriv(&self, x: T) -> T {
        let (k, t, _) = self.locate(x);
        let b = basis_deriv(t);
        let c = &self.ext[k..k + 4];
        (c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + c[3] * b[3]) * self.inv_h
    }

    /// Antiderivative with value 0 at `x = 0`.
    pub fn antiderivative(&self, x: T) -> T {
        let (k, t, periods) = self.locate(x);
        let b = basis_integral(t);
        let c = &self.ext[k..k + 4];
        let partial = (c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + c[3] * b[3]) * self.h;
        periods * self.prefix[self.n] + self.prefix[k] + partial
    }

    /// Exact integral of the interpolant over `[a, b]` (any orientation or length).
    pub fn integral(&self, a: T, b: T) -> T {
        self.antiderivative(b) - self.antiderivative(a)
    }
}

/// Solver for the clamped (zero end slope) cubic spline system.
#[derive(Debug, Clone)]
pub struct ClampedSplineSolver<T> {
    n: usize,
    tri: Tridiagonal<T>,
}

impl<T: Real> ClampedSplineSolver<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "clamped spline needs at least 3 nodes");
        let one = T::one();
        let two = T::lit(2.0);
        let mut sub = vec![one; n];
        let mut sup = vec![one; n];
        sup[0] = two;
        sub[n - 1] = two;
        let tri = Tridiagonal::new(sub, vec![T::lit(4.0); n], sup);
        Self { n, tri }
    }

    pub fn coefficients(&self, values: &[T]) -> Vec<T> {
        assert_eq!(values.len(), self.n);
        let six = T::lit(6.0);
        let mut x: Vec<T> = values.iter().map(|&v| v * six).collect();
        self.tri.solve_in_place(&mut x);
        x
    }
}

/// Tensor-product interpolant of a phase-space slice: periodic cubic in `x`,
/// clamped cubic in `p`, identically zero for `|p| > p_max`.
#[derive(Debug, Clone)]
pub struct PhaseInterpolant<T> {
    nx: usize,
    np: usize,
    inv_dx: T,
    inv_dp: T,
    p_min: T,
    p_max: T,
    // (nx + 3) x (np + 2) coefficients including ghosts, row-major in x
    ext: Vec<T>,
    stride: usize,
}

impl<T: Real> PhaseInterpolant<T> {
    /// `values` is row-major with `x` outermost, `nx * np` entries.
    pub fn new(nx: usize, np: usize, dx: T, dp: T, p_max: T, values: &[T]) -> Self {
        assert_eq!(values.len(), nx * np);
        let xs = PeriodicSplineSolver::new(nx);
        let ps = ClampedSplineSolver::new(np);
        // pass 1: periodic solve along x for every p column
        let mut cx = vec![T::zero(); nx * np];
        let mut col = vec![T::zero(); nx];
        for i in 0..np {
            for j in 0..nx {
                col[j] = values[j * np + i];
            }
            let c = xs.coefficients(&col);
            for j in 0..nx {
                cx[j * np + i] = c[j];
            }
        }
        // pass 2: clamped solve along p for every x row
        let stride = np + 2;
        let mut rows = vec![T::zero(); nx * stride];
        for j in 0..nx {
            let c = ps.coefficients(&cx[j * np..(j + 1) * np]);
            let row = &mut rows[j * stride..(j + 1) * stride];
            row[0] = c[1];
            row[1..=np].copy_from_slice(&c);
            row[np + 1] = c[np - 2];
        }
        let mut ext = Vec::with_capacity((nx + 3) * stride);
        ext.extend_from_slice(&rows[(nx - 1) * stride..]);
        ext.extend_from_slice(&rows);
        ext.extend_from_slice(&rows[..stride]);
        ext.extend_from_slice(&rows[stride..2 * stride]);
        Self {
            nx,
            np,
            inv_dx: T::one() / dx,
            inv_dp: T::one() / dp,
            p_min: -p_max,
            p_max,
            ext,
            stride,
        }
    }

    /// Value at `(x, p)`; `x` may be any real (periodic), `p` outside the box gives 0.
    #[inline]
    pub fn eval(&self, x: T, p: T) -> T {
        if !(p >= self.p_min && p <= self.p_max) {
            return T::zero();
        }
        let u = x * self.inv_dx;
        let fl = u.floor();
        let tx = u - fl;
        let kx = fl.to_i64().unwrap_or(0).rem_euclid(self.nx as i64) as usize;
        let v = (p - self.p_min) * self.inv_dp;
        let mut kp = v.floor().to_usize().unwrap_or(0);
        let mut tp = v - T::from_usize_lossy(kp);
        if kp >= self.np - 1 {
            kp = self.np - 2;
            tp = T::one();
        }
        let bx = basis(tx);
        let bp = basis(tp);
        let mut acc = T::zero();
        for (a, &wx) in bx.iter().enumerate() {
            let row = &self.ext[(kx + a) * self.stride + kp..(kx + a) * self.stride + kp + 4];
            let inner = row[0] * bp[0] + row[1] * bp[1] + row[2] * bp[2] + row[3] * bp[3];
            acc = acc + wx * inner;
        }
        acc
    }
}
