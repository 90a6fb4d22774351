//! Configuration files, built-in initial data, run orchestration and output formats.

pub mod builtin;
pub mod checks;
pub mod config;
pub mod output;
pub mod run;

pub use checks::{wave_check, WaveCheck};
pub use builtin::{builtin_f0, builtin_n_ext, wave_profile, BuiltinF0};
pub use config::{parse_config, F0Spec, NextSpec, RunConfig, SigmaSpec, WaveSpec};
pub use output::{read_snapshot, Manifest};
pub use run::{
    outcome_rows, prepare, run, run_equilibrium, run_in, run_stability, slices, RunSummary, EXIT_NOT_CONVERGED,
};
