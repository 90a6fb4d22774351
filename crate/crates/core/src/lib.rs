//! Reduced 1D Vlasov-Maxwell system for laser-plasma interaction on a periodic
//! domain: semi-Lagrangian transport along characteristics, Ampere and
//! d'Alembert/Duhamel field updates, and the fixed-point iteration coupling them.
//!
//! Everything numerical is generic over [`Real`]; the `*64` aliases below fix
//! the scalar to `f64`. The [`harness`] module (configuration files, run
//! orchestration, output formats) works in `f64` only.

pub mod characteristics;
pub mod diagnostics;
pub mod equilibria;
pub mod error;
pub mod fields;
pub mod fixed_point;
pub mod harness;
pub mod interp;
pub mod iteration_theory;
pub mod phase_space;
pub mod quadrature;
pub mod real;
pub mod stencil;

pub use characteristics::{FieldHistory, ForceSampler};
pub use diagnostics::{DiagnosticsContext, DiagnosticsRow};
pub use equilibria::{EntropyGenerator, Equilibrium};
pub use error::{Error, Result};
pub use fixed_point::{IterationTrace, SolveConfig, SolveOutcome, WindowProblem, WindowSolution};
pub use phase_space::{DistSlice, MajorizingFn, ModelVariant, PhaseGrid};
pub use real::Real;

pub type PhaseGrid64 = PhaseGrid<f64>;
pub type DistSlice64 = DistSlice<f64>;
pub type MajorizingFn64 = MajorizingFn<f64>;
pub type FieldHistory64 = FieldHistory<f64>;
pub type ForceSampler64 = ForceSampler<f64>;
pub type WindowProblem64 = WindowProblem<f64>;
pub type WindowSolution64 = WindowSolution<f64>;
pub type SolveConfig64 = SolveConfig<f64>;
pub type SolveOutcome64 = SolveOutcome<f64>;
pub type IterationTrace64 = IterationTrace<f64>;
pub type DiagnosticsRow64 = DiagnosticsRow<f64>;
pub type EntropyGenerator64 = EntropyGenerator<f64>;
pub type Equilibrium64 = Equilibrium<f64>;
