//! Self-checks exposed on the command line.

use std::f64::consts::PI;

use crate::error::Result;
use crate::fields::{duhamel_history, leapfrog_wave_oracle, SourceHistory};
use crate::phase_space::PhaseGrid;

/// Max errors of the wave solvers on `[0, 1] x [0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveCheck {
    pub nx: usize,
    pub nt: usize,
    /// Free wave from `A0 = sin x`: Duhamel against `sin x cos t`.
    pub free_duhamel: f64,
    /// Forced by `S = sin x` from rest: Duhamel against `sin x (1 - cos t)`.
    pub forced_duhamel: f64,
    /// Leapfrog errors on the same two problems; `None` when `dt > dx`.
    pub free_leapfrog: Option<f64>,
    pub forced_leapfrog: Option<f64>,
    /// `max |Duhamel - leapfrog|` on the forced problem.
    pub cross: Option<f64>,
}

impl WaveCheck {
    pub const HEADER: &'static str =
        "nx,nt,free_duhamel,forced_duhamel,free_leapfrog,forced_leapfrog,duhamel_vs_leapfrog";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{},{:e},{:e},{},{},{}",
            self.nx,
            self.nt,
            self.free_duhamel,
            self.forced_duhamel,
            opt(self.free_leapfrog),
            opt(self.forced_leapfrog),
            opt(self.cross)
        )
    }
}

fn max_err(values: &[f64], nx: usize, dt: f64, xs: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    values
        .iter()
        .enumerate()
        .fold(0.0, |acc, (k, &v)| acc.max((v - exact((k / nx) as f64 * dt, xs[k % nx])).abs()))
}

pub fn wave_check(nx: usize, nt: usize) -> Result<WaveCheck> {
    let grid = PhaseGrid::new(2.0 * PI, nx, 1.0, 9)?;
    if nt == 0 {
        return Err(crate::error::Error::InvalidArgument("nt must be positive".into()));
    }
    let dt = 1.0 / nt as f64;
    let xs = grid.xs();
    let sin: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let zero = vec![0.0; nx];

    let free_src = SourceHistory::zeros(nx, nt);
    let free = duhamel_history(&grid, dt, &sin, &zero, &free_src)?;
    let free_exact = |t: f64, x: f64| x.sin() * t.cos();
    let free_duhamel = max_err(&free.a, nx, dt, &xs, free_exact);

    let forced_src = SourceHistory::new(nx, nt, (0..=nt).flat_map(|_| sin.iter().copied()).collect())?;
    let forced = duhamel_history(&grid, dt, &zero, &zero, &forced_src)?;
    let forced_exact = |t: f64, x: f64| x.sin() * (1.0 - t.cos());
    let forced_duhamel = max_err(&forced.a, nx, dt, &xs, forced_exact);

    let (free_leapfrog, forced_leapfrog, cross) = if dt <= grid.dx() {
        let lf_free = leapfrog_wave_oracle(&grid, dt, &sin, &zero, &free_src)?;
        let lf_forced = leapfrog_wave_oracle(&grid, dt, &zero, &zero, &forced_src)?;
        let cross = crate::real::max_abs_diff(&lf_forced, &forced.a);
        (
            Some(max_err(&lf_free, nx, dt, &xs, free_exact)),
            Some(max_err(&lf_forced, nx, dt, &xs, forced_exact)),
            Some(cross),
        )
    } else {
        (None, None, None)
    };
    Ok(WaveCheck {
        nx,
        nt,
        free_duhamel,
        forced_duhamel,
        free_leapfrog,
        forced_leapfrog,
        cross,
    })
}
