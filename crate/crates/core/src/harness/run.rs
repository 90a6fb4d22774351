//! Run orchestration for the command-line front end.

use std::path::Path;

use super::builtin::{builtin_f0, builtin_n_ext, wave_profile, BuiltinF0};
use super::config::RunConfig;
use super::output::{
    diagnostics_csv, ensure_dir, snapshot_name, trace_csv, write_file, write_snapshot, Manifest, DIAGNOSTICS_FILE,
    TRACE_FILE,
};
use crate::diagnostics::{continuity_residual, DiagnosticsContext, DiagnosticsRow, Reference, SliceState};
use crate::equilibria::{perturb, solve_equilibrium, stationarity_residual, EntropyGenerator, Equilibrium, PerturbationKind};
use crate::error::{Error, Result};
use crate::fixed_point::{blowup_sentinel, solve, SentinelAdvisory, SolveConfig, SolveOutcome, DEFAULT_SENTINEL_FACTOR};
use crate::phase_space::{DistSlice, ModelVariant, PhaseGrid, DEFAULT_SUPPORT_TOLERANCE};
use crate::quadrature::periodic_integral;

/// Exit status of a run whose fixed-point iteration failed in some window.
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Window halvings attempted before a run is declared failed.
pub const DEFAULT_MAX_HALVINGS: usize = 3;

/// Sampled initial state of a configured run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: PhaseGrid<f64>,
    pub variant: ModelVariant,
    pub f0: BuiltinF0,
    pub n_ext: Vec<f64>,
    pub a0: Vec<f64>,
    pub adot0: Vec<f64>,
    pub sigma: EntropyGenerator<f64>,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let grid = config.grid();
    let variant = config.model;
    let f0 = builtin_f0(&config.f0, &grid, variant)?;
    let support = f0.f0.check_support(DEFAULT_SUPPORT_TOLERANCE);
    if !support.ok {
        return Err(Error::InvalidArgument(format!(
            "f0 reaches {:e} at |p| = p_max (tolerance {:e}); increase p_max",
            support.boundary_max, support.tolerance
        )));
    }
    let n_ext = builtin_n_ext(&config.n_ext, &grid, &f0.f0, variant);
    Ok(Prepared {
        grid,
        variant,
        n_ext,
        a0: wave_profile(&config.a0, &grid),
        adot0: wave_profile(&config.adot0, &grid),
        sigma: config.sigma.generator()?,
        f0,
    })
}

pub fn solve_config(config: &RunConfig) -> SolveConfig<f64> {
    SolveConfig {
        t_total: config.t_end,
        window_length: config.window_length,
        nt_per_window: config.nt_per_window,
        tol: config.tol_fp,
        max_iters: config.max_iters,
        max_halvings: DEFAULT_MAX_HALVINGS,
    }
}

/// Position of one output slice inside a [`SolveOutcome`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceRef {
    /// Global slice index (window boundaries counted once).
    pub index: usize,
    pub t: f64,
    pub window: usize,
    pub s: usize,
}

pub fn slices(outcome: &SolveOutcome<f64>) -> Vec<SliceRef> {
    let mut out = Vec::new();
    let mut index = 0;
    for (w, win) in outcome.windows.iter().enumerate() {
        let first = usize::from(w > 0);
        for s in first..=win.nt() {
            out.push(SliceRef {
                index,
                t: win.t_start + win.fields.time(s),
                window: w,
                s,
            });
            index += 1;
        }
    }
    out
}

/// Diagnostics rows for every slice of a solved run.
pub fn outcome_rows(outcome: &SolveOutcome<f64>, ctx: &DiagnosticsContext<f64>) -> Result<Vec<DiagnosticsRow<f64>>> {
    let grid = *ctx.grid();
    let continuity: Vec<Vec<f64>> = outcome
        .windows
        .iter()
        .map(|w| continuity_residual(&w.n_hist, &w.j_hist, w.fields.dt(), &grid).map(|c| c.per_slice))
        .collect::<Result<_>>()?;
    slices(outcome)
        .into_iter()
        .map(|r| {
            let win = &outcome.windows[r.window];
            let fh = &win.fields;
            ctx.row(
                SliceState {
                    t: r.t,
                    f: &win.dist[r.s],
                    e: fh.e_at(r.s),
                    a: fh.a_at(r.s),
                    adot: fh.adot_at(r.s),
                    dxa: fh.dxa_at(r.s),
                    dxxa: fh.dxxa_at(r.s),
                },
                continuity[r.window][r.s],
            )
        })
        .collect()
}

/// Sentinel readings of every accepted and rejected window attempt that warned.
pub fn sentinel_warnings(outcome: &SolveOutcome<f64>) -> Vec<SentinelAdvisory> {
    outcome
        .windows
        .iter()
        .map(|w| &w.trace)
        .chain(outcome.rejected.iter())
        .map(|t| blowup_sentinel(t, DEFAULT_SENTINEL_FACTOR))
        .filter(|a| a.warn)
        .collect()
}

/// Result of [`run`] and [`run_stability`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub exit_code: i32,
    pub outcome: SolveOutcome<f64>,
    pub rows: Vec<DiagnosticsRow<f64>>,
    pub sentinel: Vec<SentinelAdvisory>,
    pub config_hash: String,
}

impl RunSummary {
    pub fn completed(&self) -> bool {
        self.outcome.completed
    }
}

fn write_outputs(
    config: &RunConfig,
    dir: &Path,
    outcome: SolveOutcome<f64>,
    ctx: &DiagnosticsContext<f64>,
    extra: Vec<(String, String)>,
) -> Result<RunSummary> {
    ensure_dir(dir)?;
    let rows = outcome_rows(&outcome, ctx)?;
    write_file(&dir.join(DIAGNOSTICS_FILE), diagnostics_csv(&rows).as_bytes())?;
    let n_ok = outcome.windows.len();
    let traces = outcome
        .windows
        .iter()
        .enumerate()
        .map(|(w, s)| (w, &s.trace));
    write_file(&dir.join(TRACE_FILE), trace_csv(traces).as_bytes())?;
    let failed_traces = outcome.rejected.iter().map(|t| (n_ok, t));
    if !outcome.rejected.is_empty() {
        write_file(&dir.join("rejected_trace.csv"), trace_csv(failed_traces).as_bytes())?;
    }

    let mut snapshots = Vec::new();
    for r in slices(&outcome) {
        if r.index % config.snapshot_stride == 0 {
            write_snapshot(dir, r.index, &outcome.windows[r.window].dist[r.s])?;
            snapshots.push((r.index, r.t, snapshot_name(r.index)));
        }
    }
    let sentinel = sentinel_warnings(&outcome);
    let hash = config.hash();
    let t_reached = slices(&outcome).last().map_or(0.0, |r| r.t);
    let flagged = outcome.windows.iter().filter(|w| w.escape.flagged).count();
    let mut extra_lines = vec![
        ("partial".to_string(), (!outcome.completed).to_string()),
        ("t_reached".into(), t_reached.to_string()),
        ("windows".into(), n_ok.to_string()),
        (
            "converged_windows".into(),
            outcome.windows.iter().filter(|w| w.converged()).count().to_string(),
        ),
        ("rejected_attempts".into(), outcome.rejected.len().to_string()),
        ("escape_flagged_windows".into(), flagged.to_string()),
    ];
    extra_lines.extend(extra);
    for a in &sentinel {
        extra_lines.push(("sentinel".into(), a.reason.clone().unwrap_or_default()));
    }
    let grid = ctx.grid();
    Manifest {
        status: if outcome.completed { "complete" } else { "partial" }.into(),
        model: config.model.to_string(),
        nx: grid.nx(),
        np: grid.np(),
        length: grid.length(),
        p_max: grid.p_max(),
        dt: config.dt(),
        config_hash: hash.clone(),
        snapshots,
        extra: extra_lines,
    }
    .write(dir)?;
    Ok(RunSummary {
        exit_code: if outcome.completed { 0 } else { EXIT_NOT_CONVERGED },
        outcome,
        rows,
        sentinel,
        config_hash: hash,
    })
}

/// Runs a configured simulation and writes its outputs into `dir`.
pub fn run_in(config: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let p = prepare(config)?;
    let outcome = solve(
        p.f0.f0.clone(),
        p.a0.clone(),
        p.adot0.clone(),
        p.n_ext.clone(),
        p.variant,
        solve_config(config),
    )?;
    let ctx = DiagnosticsContext::new(p.grid, p.n_ext.clone(), p.variant, p.sigma, None);
    let m = p.f0.moments;
    let extra = vec![("majorant_moments".to_string(), format!("{},{},{}", m[0], m[1], m[2]))];
    write_outputs(config, dir, outcome, &ctx, extra)
}

/// [`run_in`] with the configured `output_dir`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    run_in(config, &config.output_dir)
}

fn build_equilibrium(config: &RunConfig) -> Result<(Prepared, Equilibrium<f64>)> {
    let p = prepare(config)?;
    let mass = periodic_integral(&p.n_ext, p.grid.dx());
    let eq = solve_equilibrium(mass, &p.n_ext, &p.grid, p.sigma, p.variant)?;
    Ok((p, eq))
}

/// Solves for the equilibrium confined by the configured `n_ext` (mass
/// `int n_ext`, `A = 0`) and writes `equilibrium.csv`, `f_inf.bin` and a manifest.
pub fn run_equilibrium(config: &RunConfig, dir: &Path) -> Result<Equilibrium<f64>> {
    let (p, eq) = build_equilibrium(config)?;
    ensure_dir(dir)?;
    let n = crate::phase_space::moment(&eq.f_inf, crate::phase_space::MomentKind::Density, p.variant);
    let mut csv = String::from("x,n_ext,n,phi\n");
    for (j, x) in p.grid.xs().iter().enumerate() {
        csv.push_str(&format!("{x:e},{:e},{:e},{:e}\n", eq.n_ext[j], n[j], eq.phi_inf[j]));
    }
    write_file(&dir.join("equilibrium.csv"), csv.as_bytes())?;
    write_file(&dir.join("f_inf.bin"), &super::output::snapshot_bytes(&eq.f_inf))?;
    Manifest {
        status: "complete".into(),
        model: config.model.to_string(),
        nx: p.grid.nx(),
        np: p.grid.np(),
        length: p.grid.length(),
        p_max: p.grid.p_max(),
        dt: config.dt(),
        config_hash: config.hash(),
        snapshots: Vec::new(),
        extra: vec![
            ("mass".into(), eq.mass.to_string()),
            ("alpha".into(), eq.alpha.to_string()),
            ("sweeps".into(), eq.sweeps.to_string()),
            ("poisson_residual".into(), eq.poisson_residual().to_string()),
            ("mass_error".into(), eq.mass_error().to_string()),
            ("stationarity_residual".into(), stationarity_residual(&eq).to_string()),
        ],
    }
    .write(dir)?;
    Ok(eq)
}

/// Perturbs the configured equilibrium by `eps cos(2 pi mode x / L)` (density
/// modulation), evolves it with the configured pump wave and writes the run
/// outputs with the distance columns filled, plus `stability.csv`.
pub fn run_stability(config: &RunConfig, eps: f64, mode: usize, dir: &Path) -> Result<RunSummary> {
    let (p, eq) = build_equilibrium(config)?;
    let f0: DistSlice<f64> = perturb(&eq, eps, mode, PerturbationKind::DensityMod)?;
    let outcome = solve(
        f0,
        p.a0.clone(),
        p.adot0.clone(),
        eq.n_ext.clone(),
        p.variant,
        solve_config(config),
    )?;
    let ctx = DiagnosticsContext::new(
        p.grid,
        eq.n_ext.clone(),
        p.variant,
        p.sigma,
        Some(Reference {
            f: eq.f_inf.clone(),
            phi: eq.phi_inf.clone(),
        }),
    );
    let extra = vec![
        ("eps".to_string(), eps.to_string()),
        ("mode".to_string(), mode.to_string()),
    ];
    let summary = write_outputs(config, dir, outcome, &ctx, extra)?;
    let mut csv = String::from("t,sigma_plus_wt,l1,l2,h1\n");
    for r in &summary.rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e}\n",
            r.t,
            r.relative_entropy.unwrap_or(f64::NAN) + r.wt,
            r.l1_dist.unwrap_or(f64::NAN),
            r.l2_dist.unwrap_or(f64::NAN),
            r.h1_phi_dist.unwrap_or(f64::NAN)
        ));
    }
    write_file(&dir.join("stability.csv"), csv.as_bytes())?;
    Ok(summary)
}
