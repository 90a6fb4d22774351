//! The recurrence operator `L` (transport, Ampere, Duhamel) and the outer
//! fixed-point loop with its convergence and blow-up monitoring.

use crate::characteristics::{assemble_force, EscapeReport, FieldHistory, Transport};
use crate::error::{Error, Result};
use crate::fields::{
    ampere_history, duhamel_history, e0_from_density, poisson_e0, SourceHistory,
};
use crate::phase_space::{moment, DistSlice, ModelVariant, MomentKind, PhaseGrid};
use crate::real::{max_abs, max_abs_diff, Real};
use crate::stencil::d1;

/// Distribution at every slice of a window.
pub type DistHistory<T> = Vec<DistSlice<T>>;

/// Default number of iterations before a window is declared non-convergent.
pub const DEFAULT_MAX_ITERS: usize = 50;
/// Growth factor over the last five iterations that triggers the blow-up warning.
pub const DEFAULT_SENTINEL_FACTOR: f64 = 10.0;
/// Number of trailing iterations inspected by [`blowup_sentinel`].
pub const SENTINEL_WINDOW: usize = 5;

/// Initial data and discretisation of one time window.
#[derive(Debug, Clone)]
pub struct WindowProblem<T> {
    grid: PhaseGrid<T>,
    nt: usize,
    dt: T,
    variant: ModelVariant,
    f0: DistSlice<T>,
    a0: Vec<T>,
    adot0: Vec<T>,
    n_ext: Vec<T>,
    e0: Vec<T>,
    transport: Transport<T>,
}

impl<T: Real> WindowProblem<T> {
    /// Validates shapes and neutrality and builds `E0` from the Gauss law.
    pub fn new(
        f0: DistSlice<T>,
        a0: Vec<T>,
        adot0: Vec<T>,
        n_ext: Vec<T>,
        nt: usize,
        dt: T,
        variant: ModelVariant,
    ) -> Result<Self> {
        let grid = *f0.grid();
        let n0 = moment(&f0, MomentKind::Density, variant);
        let e0 = poisson_e0(&n0, &n_ext, &grid)?;
        Self::with_e0(f0, a0, adot0, n_ext, e0, nt, dt, variant)
    }

    /// Restart from a transported slice: `E0` is rebuilt from the density after
    /// removing whatever net charge the transport left behind.
    pub fn restart(
        f0: DistSlice<T>,
        a0: Vec<T>,
        adot0: Vec<T>,
        n_ext: Vec<T>,
        nt: usize,
        dt: T,
        variant: ModelVariant,
    ) -> Result<Self> {
        let grid = *f0.grid();
        if n_ext.len() != grid.nx() {
            return Err(Error::Shape {
                expected: grid.nx(),
                got: n_ext.len(),
            });
        }
        let n0 = moment(&f0, MomentKind::Density, variant);
        let e0 = e0_from_density(&n0, &n_ext, &grid);
        Self::with_e0(f0, a0, adot0, n_ext, e0, nt, dt, variant)
    }

    #[allow(clippy::too_many_arguments)]
    fn with_e0(
        f0: DistSlice<T>,
        a0: Vec<T>,
        adot0: Vec<T>,
        n_ext: Vec<T>,
        e0: Vec<T>,
        nt: usize,
        dt: T,
        variant: ModelVariant,
    ) -> Result<Self> {
        let grid = *f0.grid();
        for arr in [&a0, &adot0, &n_ext] {
            if arr.len() != grid.nx() {
                return Err(Error::Shape {
                    expected: grid.nx(),
                    got: arr.len(),
                });
            }
        }
        if nt == 0 || !(dt > T::zero()) {
            return Err(Error::InvalidArgument("window needs nt >= 1 and dt > 0".into()));
        }
        let transport = Transport::new(&f0);
        Ok(Self {
            grid,
            nt,
            dt,
            variant,
            f0,
            a0,
            adot0,
            n_ext,
            e0,
            transport,
        })
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    pub fn variant(&self) -> ModelVariant {
        self.variant
    }
    pub fn f0(&self) -> &DistSlice<T> {
        &self.f0
    }
    pub fn a0(&self) -> &[T] {
        &self.a0
    }
    pub fn adot0(&self) -> &[T] {
        &self.adot0
    }
    pub fn n_ext(&self) -> &[T] {
        &self.n_ext
    }
    pub fn e0(&self) -> &[T] {
        &self.e0
    }

    /// Constant-in-time extension of `(E0, A0, Adot0)`: the default first iterate.
    pub fn constant_iterate(&self) -> FieldHistory<T> {
        FieldHistory::constant_in_time(self.grid, self.nt, self.dt, &self.e0, &self.a0, &self.adot0)
            .expect("shapes validated at construction")
    }

    /// `E = E0` and `A` the free wave from `(A0, Adot0)`; an alternative first iterate.
    pub fn vacuum_wave_iterate(&self) -> FieldHistory<T> {
        let src = SourceHistory::zeros(self.grid.nx(), self.nt);
        let w = duhamel_history(&self.grid, self.dt, &self.a0, &self.adot0, &src)
            .expect("shapes validated at construction");
        FieldHistory::new(
            self.grid,
            self.nt,
            self.dt,
            self.e0.repeat(self.nt + 1),
            w.a,
            w.adot,
            w.dxa,
            w.dxxa,
        )
        .expect("shapes validated at construction")
    }
}

/// Result of one application of `L`.
#[derive(Debug, Clone)]
pub struct LOutput<T> {
    pub fields: FieldHistory<T>,
    pub dist: DistHistory<T>,
    /// Density on `(nt + 1) x nx` nodes.
    pub n_hist: Vec<T>,
    /// Flux on `(nt + 1) x nx` nodes.
    pub j_hist: Vec<T>,
    pub escape: EscapeReport,
}

/// One pass of the recurrence: force, characteristic solution, Ampere and Duhamel.
///
/// The wave source is `-n A` with the new density and the input iterate's `A`.
pub fn apply_l<T: Real>(problem: &WindowProblem<T>, fields: &FieldHistory<T>) -> Result<LOutput<T>> {
    let grid = problem.grid;
    if fields.grid() != &grid || fields.nt() != problem.nt || fields.dt() != problem.dt {
        return Err(Error::InvalidArgument(
            "field history does not match the window".into(),
        ));
    }
    let nt = problem.nt;
    let force = assemble_force(fields);
    let mut dist = Vec::with_capacity(nt + 1);
    let mut n_hist = Vec::with_capacity((nt + 1) * grid.nx());
    let mut j_hist = Vec::with_capacity((nt + 1) * grid.nx());
    let mut escape = EscapeReport::none(0);
    for s in 0..=nt {
        let (f, rep) = problem.transport.transport(&force, s, problem.variant);
        escape = escape.merge(rep);
        n_hist.extend(moment(&f, MomentKind::Density, problem.variant));
        j_hist.extend(moment(&f, MomentKind::Flux, problem.variant));
        dist.push(f);
    }
    let e = ampere_history(&problem.e0, &j_hist, nt, problem.dt)?;
    // n_gamma = n for both closures
    let source = SourceHistory::from_density(&n_hist, &fields.a, grid.nx(), nt)?;
    let w = duhamel_history(&grid, problem.dt, &problem.a0, &problem.adot0, &source)?;
    let fields = FieldHistory::new(grid, nt, problem.dt, e, w.a, w.adot, w.dxa, w.dxxa)?;
    Ok(LOutput {
        fields,
        dist,
        n_hist,
        j_hist,
        escape,
    })
}

/// Sup-norm changes between consecutive iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry<T> {
    pub k: usize,
    pub de: T,
    pub da: T,
    pub dxa_delta: T,
    pub df: T,
    pub sup_dxxa: T,
    pub sup_dxf: T,
}

impl<T: Real> TraceEntry<T> {
    /// `u_k = ||A_{k+1} - A_k|| + ||F_{k+1} - F_k||`.
    pub fn u(&self) -> T {
        self.da + self.df
    }
}

/// Per-iteration history of the fixed-point loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    pub entries: Vec<TraceEntry<T>>,
    pub converged: bool,
    /// Applications of `L` needed to reach the fixed point, excluding the
    /// final certifying application (at least 1).
    pub iterations_used: usize,
}

impl<T: Real> IterationTrace<T> {
    /// The sequence `u_k`.
    pub fn u(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.u()).collect()
    }
}

/// Stopping rule of the fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig<T> {
    pub tol: T,
    pub max_iters: usize,
}

/// Converged (or last) iterate of one window.
#[derive(Debug, Clone)]
pub struct WindowSolution<T> {
    /// Start time of the window.
    pub t_start: T,
    pub fields: FieldHistory<T>,
    pub dist: DistHistory<T>,
    pub n_hist: Vec<T>,
    pub j_hist: Vec<T>,
    pub trace: IterationTrace<T>,
    pub escape: EscapeReport,
    pub n_ext: Vec<T>,
}

impl<T: Real> WindowSolution<T> {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }
    pub fn nt(&self) -> usize {
        self.fields.nt()
    }
    pub fn n_at(&self, s: usize) -> &[T] {
        let nx = self.fields.grid().nx();
        &self.n_hist[s * nx..(s + 1) * nx]
    }
    pub fn j_at(&self, s: usize) -> &[T] {
        let nx = self.fields.grid().nx();
        &self.j_hist[s * nx..(s + 1) * nx]
    }
}

fn sup_diff_force<T: Real>(a: &FieldHistory<T>, b: &FieldHistory<T>) -> T {
    (0..=a.nt())
        .map(|s| max_abs_diff(&a.force_at(s), &b.force_at(s)))
        .fold(T::zero(), |x, y| x.max(y))
}

fn sup_dx_force<T: Real>(f: &FieldHistory<T>) -> T {
    (0..=f.nt())
        .map(|s| max_abs(&d1(&f.force_at(s), f.grid().dx())))
        .fold(T::zero(), |x, y| x.max(y))
}

/// Iterates `L` from the constant-in-time extension of the initial data.
pub fn solve_window<T: Real>(
    problem: &WindowProblem<T>,
    config: IterationConfig<T>,
) -> Result<WindowSolution<T>> {
    solve_window_from(problem, problem.constant_iterate(), config)
}

/// Iterates `L` from a caller-supplied first iterate until
/// `||A_{k+1} - A_k|| + ||F_{k+1} - F_k|| <= tol` or `max_iters` applications.
///
/// A non-converged window is returned with `trace.converged == false`.
pub fn solve_window_from<T: Real>(
    problem: &WindowProblem<T>,
    first: FieldHistory<T>,
    config: IterationConfig<T>,
) -> Result<WindowSolution<T>> {
    if !(config.tol > T::zero()) || config.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "tolerance must be positive and max_iters at least 1".into(),
        ));
    }
    let mut current = first;
    let mut entries = Vec::new();
    let mut converged = false;
    let mut last: Option<LOutput<T>> = None;
    for k in 0..config.max_iters {
        let out = apply_l(problem, &current)?;
        let next = &out.fields;
        let entry = TraceEntry {
            k,
            de: max_abs_diff(&next.e, &current.e),
            da: max_abs_diff(&next.a, &current.a),
            dxa_delta: max_abs_diff(&next.dxa, &current.dxa),
            df: sup_diff_force(next, &current),
            sup_dxxa: max_abs(&next.dxxa),
            sup_dxf: sup_dx_force(next),
        };
        entries.push(entry);
        current = out.fields.clone();
        last = Some(out);
        let u = entry.u();
        if !u.is_finite() {
            break;
        }
        if u <= config.tol {
            converged = true;
            break;
        }
    }
    let out = last.expect("at least one iteration runs");
    let iterations_used = if converged {
        entries.len().saturating_sub(1).max(1)
    } else {
        entries.len()
    };
    Ok(WindowSolution {
        t_start: T::zero(),
        fields: out.fields,
        dist: out.dist,
        n_hist: out.n_hist,
        j_hist: out.j_hist,
        trace: IterationTrace {
            entries,
            converged,
            iterations_used,
        },
        escape: out.escape,
        n_ext: problem.n_ext.clone(),
    })
}

/// Global run parameters for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig<T> {
    pub t_total: T,
    pub window_length: T,
    /// Slices per window of the requested length.
    pub nt_per_window: usize,
    pub tol: T,
    pub max_iters: usize,
    /// How many times a failing window may be halved (at fixed `dt`).
    pub max_halvings: usize,
}

/// Windows computed by [`solve`], in time order.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub windows: Vec<WindowSolution<T>>,
    /// `true` when `[0, t_total]` was covered by converged windows.
    pub completed: bool,
    /// Traces of windows that failed and were retried with half the length.
    pub rejected: Vec<IterationTrace<T>>,
}

/// Chains [`solve_window`] over `[0, t_total]`.
///
/// Each window restarts from the final slice of the previous one with `E`
/// rebuilt from the Gauss law. A window that fails to converge is retried with
/// half its length (same `dt`) up to `max_halvings` times; after that the run
/// stops and the partial result is returned with `completed == false`.
pub fn solve<T: Real>(
    f0: DistSlice<T>,
    a0: Vec<T>,
    adot0: Vec<T>,
    n_ext: Vec<T>,
    variant: ModelVariant,
    config: SolveConfig<T>,
) -> Result<SolveOutcome<T>> {
    if !(config.window_length > T::zero()) || config.nt_per_window == 0 {
        return Err(Error::InvalidArgument("window length and nt must be positive".into()));
    }
    if !(config.t_total >= T::zero()) {
        return Err(Error::InvalidArgument("t_total must be nonnegative".into()));
    }
    let dt = config.window_length / T::from_usize_lossy(config.nt_per_window);
    let total_slices = (config.t_total / dt).round().to_usize().unwrap_or(0);
    let grid = *f0.grid();
    let iter_cfg = IterationConfig {
        tol: config.tol,
        max_iters: config.max_iters,
    };
    // validates neutrality of the initial data
    let n0 = moment(&f0, MomentKind::Density, variant);
    poisson_e0(&n0, &n_ext, &grid)?;

    let mut windows: Vec<WindowSolution<T>> = Vec::new();
    let mut rejected = Vec::new();
    let mut done = 0usize;
    let (mut f, mut a, mut adot) = (f0, a0, adot0);
    while done < total_slices {
        let mut nt = config.nt_per_window.min(total_slices - done);
        let mut halvings = 0;
        let sol = loop {
            let problem = if done == 0 {
                WindowProblem::new(f.clone(), a.clone(), adot.clone(), n_ext.clone(), nt, dt, variant)?
            } else {
                WindowProblem::restart(f.clone(), a.clone(), adot.clone(), n_ext.clone(), nt, dt, variant)?
            };
            let mut sol = solve_window(&problem, iter_cfg)?;
            sol.t_start = dt * T::from_usize_lossy(done);
            if sol.converged() || halvings >= config.max_halvings || nt < 2 {
                break sol;
            }
            rejected.push(sol.trace.clone());
            nt /= 2;
            halvings += 1;
        };
        let ok = sol.converged();
        let last = sol.nt();
        f = sol.dist[last].clone();
        a = sol.fields.a_at(last).to_vec();
        adot = sol.fields.adot_at(last).to_vec();
        done += last;
        windows.push(sol);
        if !ok {
            return Ok(SolveOutcome {
                windows,
                completed: false,
                rejected,
            });
        }
    }
    Ok(SolveOutcome {
        windows,
        completed: true,
        rejected,
    })
}

/// `a sum_{i=1}^{k-1} (b t)^i / i! + c (b t)^k / k!`.
pub fn telescope_envelope<T: Real>(a: T, b: T, c: T, t: T, k: usize) -> T {
    let bt = b * t;
    let mut term = T::one();
    let mut sum = T::zero();
    for i in 1..k {
        term = term * bt / T::from_usize_lossy(i);
        sum = sum + term;
    }
    let last = if k == 0 {
        T::one()
    } else {
        term * bt / T::from_usize_lossy(k)
    };
    a * sum + c * last
}

/// Smallest `b` with `u_k <= u_0 (b t)^k / k!` for `1 <= k <= k_max`.
pub fn fit_envelope_rate<T: Real>(u: &[T], t: T, k_max: usize) -> T {
    let u0 = u.first().copied().unwrap_or_else(T::zero);
    if !(u0 > T::zero()) || !(t > T::zero()) {
        return T::zero();
    }
    let mut fact = T::one();
    let mut b = T::zero();
    for (k, &uk) in u.iter().enumerate().skip(1).take(k_max) {
        fact = fact * T::from_usize_lossy(k);
        if uk > T::zero() {
            let r = (uk * fact / u0).powf(T::one() / T::from_usize_lossy(k)) / t;
            b = b.max(r);
        }
    }
    b
}

/// Blow-up advisory for one iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SentinelAdvisory {
    pub warn: bool,
    /// Iteration at which the warning first fired.
    pub iteration: Option<usize>,
    pub reason: Option<String>,
}

/// Flags a warning when `sup |d2A/dx2|` or `sup |dF/dx|` grows strictly over
/// five consecutive iterations by more than `factor`, or becomes non-finite.
///
/// The check is what an online monitor would see: every trailing window of the
/// trace is examined in iteration order and the first one that trips is
/// reported, so growth that later subsides still counts.
pub fn blowup_sentinel<T: Real>(trace: &IterationTrace<T>, factor: T) -> SentinelAdvisory {
    let pick: [(&str, fn(&TraceEntry<T>) -> T); 2] =
        [("sup_dxxA", |e| e.sup_dxxa), ("sup_dxF", |e| e.sup_dxf)];
    let series: Vec<(&str, Vec<T>)> = pick
        .iter()
        .map(|&(name, get)| (name, trace.entries.iter().map(get).collect()))
        .collect();
    for k in 0..trace.entries.len() {
        for (name, v) in &series {
            if !v[k].is_finite() {
                return SentinelAdvisory {
                    warn: true,
                    iteration: Some(k),
                    reason: Some(format!("{name} is not finite at iteration {k}")),
                };
            }
            if k + 1 < SENTINEL_WINDOW {
                continue;
            }
            let tail = &v[k + 1 - SENTINEL_WINDOW..=k];
            let increasing = tail.windows(2).all(|w| w[1] > w[0]);
            if increasing && tail[0] > T::zero() && tail[SENTINEL_WINDOW - 1] > factor * tail[0] {
                return SentinelAdvisory {
                    warn: true,
                    iteration: Some(k),
                    reason: Some(format!(
                        "{name} grew from {} to {} over iterations {}..={k}",
                        tail[0],
                        tail[SENTINEL_WINDOW - 1],
                        k + 1 - SENTINEL_WINDOW
                    )),
                };
            }
        }
    }
    SentinelAdvisory {
        warn: false,
        iteration: None,
        reason: None,
    }
}
