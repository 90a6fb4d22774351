use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vm1d::harness::{self, RunConfig, WaveCheck};
use vm1d::iteration_theory::{
    compute_t1, fixed_points, iterate_v, tangency_time, FixedPoints, PhiParams, Verdict,
};

#[derive(Parser)]
#[command(name = "vm1d", version, about = "Reduced 1D Vlasov-Maxwell solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fixed-point solver and write diagnostics, traces and snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for the equilibrium confined by the configured background.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve a density-modulated perturbation of the configured equilibrium.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long)]
        mode: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Critical time, fixed points and iteration verdict of the scalar recurrence.
    AppendixB {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Defaults to half the critical time.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        v0: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Cross-check the wave solvers against exact solutions and the leapfrog oracle.
    WaveCheck {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        nt: usize,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(harness::parse_config(&text)?)
}

fn appendix_b(alpha: f64, beta: f64, t: Option<f64>, v0: f64, steps: usize) -> Result<String> {
    let params = PhiParams::new(alpha, beta)?;
    let t1 = compute_t1(params);
    let t = t.unwrap_or(0.5 * t1);
    let (class, low, high) = match fixed_points(t, params)? {
        FixedPoints::Degenerate(a) => ("degenerate", Some(a), None),
        FixedPoints::Two { low, high } => ("two", Some(low), Some(high)),
        FixedPoints::Tangent(v) => ("tangent", Some(v), Some(v)),
        FixedPoints::None => ("none", None, None),
    };
    let (_, verdict) = iterate_v(v0, t, params, steps)?;
    let (verdict, limit, used) = match verdict {
        Verdict::Converged { limit, steps } => ("converged", Some(limit), Some(steps)),
        Verdict::Diverged { steps } => ("diverged", None, Some(steps)),
        Verdict::Undecided => ("undecided", None, None),
    };
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    Ok(format!(
        "alpha,beta,T1,tangency_time,t,v0,classification,v_low,v_high,verdict,limit,steps\n\
         {alpha},{beta},{t1},{},{t},{v0},{class},{},{},{verdict},{},{}\n",
        tangency_time(params),
        opt(low),
        opt(high),
        opt(limit),
        used.map(|s| s.to_string()).unwrap_or_default()
    ))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(&config)?;
            let summary = harness::run_in(&cfg, &out)?;
            for w in &summary.sentinel {
                eprintln!("warning: {}", w.reason.as_deref().unwrap_or("blow-up sentinel"));
            }
            if !summary.completed() {
                eprintln!("fixed-point iteration did not converge; partial outputs in {}", out.display());
            }
            Ok(ExitCode::from(summary.exit_code as u8))
        }
        Command::Equilibrium { config, out } => {
            let eq = harness::run_equilibrium(&load(&config)?, &out)?;
            println!(
                "alpha = {}, sweeps = {}, poisson_residual = {:e}",
                eq.alpha,
                eq.sweeps,
                eq.poisson_residual()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stability { config, eps, mode, out } => {
            let summary = harness::run_stability(&load(&config)?, eps, mode, &out)?;
            Ok(ExitCode::from(summary.exit_code as u8))
        }
        Command::AppendixB { alpha, beta, t, v0, steps } => {
            print!("{}", appendix_b(alpha, beta, t, v0, steps)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::WaveCheck { nx, nt } => {
            let report = harness::wave_check(nx, nt)?;
            println!("{}\n{}", WaveCheck::HEADER, report.to_csv());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
