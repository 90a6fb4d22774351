//! Built-in initial conditions and backgrounds.

use std::f64::consts::PI;

use super::config::{F0Spec, NextSpec, WaveSpec};
use crate::error::{Error, Result};
use crate::phase_space::{moment, DistSlice, MajorizingFn, ModelVariant, MomentKind, PhaseGrid};

/// Initial distribution together with its Gaussian majorant.
#[derive(Debug, Clone)]
pub struct BuiltinF0 {
    pub f0: DistSlice<f64>,
    /// `C exp(-p^2 / 4)`; `None` for vacuum.
    pub majorant: Option<MajorizingFn<f64>>,
    /// `M_0, M_1, M_2` of the majorant (zero for vacuum).
    pub moments: [f64; 3],
}

fn gauss(p: f64) -> f64 {
    (-0.5 * p * p).exp() / (2.0 * PI).sqrt()
}

fn modulation(eps: f64, mode: usize, length: f64) -> impl Fn(f64) -> f64 {
    let k = 2.0 * PI * mode as f64 / length;
    move |x| 1.0 + eps * (k * x).cos()
}

/// Samples a built-in `f0`.
///
/// Every profile is Gaussian in `p` (unit temperature) for both models, so a
/// single majorant `C exp(-p^2/4)` covers all of them.
pub fn builtin_f0(spec: &F0Spec, grid: &PhaseGrid<f64>, _variant: ModelVariant) -> Result<BuiltinF0> {
    let length = grid.length();
    let check_eps = |eps: f64| {
        if eps.abs() > 1.0 {
            Err(Error::InvalidArgument(format!(
                "modulation amplitude {eps} makes f0 negative; |eps| must not exceed 1"
            )))
        } else {
            Ok(())
        }
    };
    let (f0, c) = match *spec {
        F0Spec::Vacuum => {
            return Ok(BuiltinF0 {
                f0: DistSlice::zeros(*grid),
                majorant: None,
                moments: [0.0; 3],
            })
        }
        F0Spec::UniformMaxwellian { nbar } => (
            DistSlice::from_fn(*grid, |_, p| nbar * gauss(p))?,
            nbar / (2.0 * PI).sqrt(),
        ),
        F0Spec::ModulatedMaxwellian { nbar, eps, mode } => {
            check_eps(eps)?;
            let m = modulation(eps, mode, length);
            (
                DistSlice::from_fn(*grid, |x, p| nbar * m(x) * gauss(p))?,
                nbar * (1.0 + eps.abs()) / (2.0 * PI).sqrt(),
            )
        }
        F0Spec::TwoStream { nbar, v0, eps, mode } => {
            check_eps(eps)?;
            let m = modulation(eps, mode, length);
            // e^{-(p - v0)^2/2} <= e^{v0^2/2} e^{-p^2/4}, maximum at p = 2 v0
            (
                DistSlice::from_fn(*grid, |x, p| nbar * m(x) * 0.5 * (gauss(p - v0) + gauss(p + v0)))?,
                nbar * (1.0 + eps.abs()) * (0.5 * v0 * v0).exp() / (2.0 * PI).sqrt(),
            )
        }
    };
    let g = MajorizingFn::gaussian(c, 2f64.sqrt())?;
    let moments = [g.moment(0), g.moment(1), g.moment(2)];
    Ok(BuiltinF0 {
        f0,
        majorant: Some(g),
        moments,
    })
}

/// Samples a background density.
pub fn builtin_n_ext(spec: &NextSpec, grid: &PhaseGrid<f64>, f0: &DistSlice<f64>, variant: ModelVariant) -> Vec<f64> {
    match *spec {
        NextSpec::Uniform { nbar } => vec![nbar; grid.nx()],
        NextSpec::Cosine { nbar, eps, mode } => {
            let m = modulation(eps, mode, grid.length());
            grid.xs().iter().map(|&x| nbar * m(x)).collect()
        }
        NextSpec::MatchF0 => moment(f0, MomentKind::Density, variant),
        NextSpec::Zero => vec![0.0; grid.nx()],
    }
}

/// `amplitude sin(2 pi mode x / L)` on the x-nodes.
pub fn wave_profile(spec: &WaveSpec, grid: &PhaseGrid<f64>) -> Vec<f64> {
    let k = 2.0 * PI * spec.mode as f64 / grid.length();
    grid.xs().iter().map(|&x| spec.amplitude * (k * x).sin()).collect()
}
