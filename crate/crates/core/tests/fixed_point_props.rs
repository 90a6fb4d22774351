use std::f64::consts::PI;

use vm1d::fixed_point::{apply_l, solve_window, solve_window_from, IterationConfig, WindowProblem};
use vm1d::{DistSlice, FieldHistory, ModelVariant, PhaseGrid, WindowSolution};

const TOL: f64 = 1e-10;

fn grid() -> PhaseGrid<f64> {
    PhaseGrid::new(2.0 * PI, 16, 6.0, 65).unwrap()
}

struct Data {
    f0: DistSlice<f64>,
    a0: Vec<f64>,
    adot0: Vec<f64>,
    n_ext: Vec<f64>,
}

fn data(phase: f64) -> Data {
    let g = grid();
    let f0 = DistSlice::from_fn(g, |x, p| {
        (1.0 + 0.1 * (x + phase).cos()) * (-0.5 * p * p).exp() / (2.0 * PI).sqrt()
    })
    .unwrap();
    let xs = g.xs();
    Data {
        f0,
        a0: xs.iter().map(|&x| 0.1 * (x + phase).sin()).collect(),
        adot0: xs.iter().map(|&x| 0.05 * (2.0 * (x + phase)).cos()).collect(),
        n_ext: vec![1.0; g.nx()],
    }
}

fn problem(d: &Data, variant: ModelVariant) -> WindowProblem<f64> {
    WindowProblem::new(d.f0.clone(), d.a0.clone(), d.adot0.clone(), d.n_ext.clone(), 16, 1.0 / 16.0, variant)
        .unwrap()
}

fn cfg() -> IterationConfig<f64> {
    IterationConfig {
        tol: TOL,
        max_iters: 30,
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn solved(variant: ModelVariant) -> (WindowProblem<f64>, WindowSolution<f64>) {
    let p = problem(&data(0.0), variant);
    let sol = solve_window(&p, cfg()).unwrap();
    assert!(sol.converged(), "{:?}", sol.trace.u());
    (p, sol)
}

#[test]
fn reapplying_l_moves_the_fixed_point_by_at_most_twice_tol() {
    for variant in [ModelVariant::Qr, ModelVariant::Nr] {
        let (p, sol) = solved(variant);
        let again = apply_l(&p, &sol.fields).unwrap();
        assert!(sup_diff(&again.fields.e, &sol.fields.e) <= 2.0 * TOL);
        assert!(sup_diff(&again.fields.a, &sol.fields.a) <= 2.0 * TOL);
    }
}

#[test]
fn different_first_iterates_reach_the_same_fields() {
    let (p, sol) = solved(ModelVariant::Qr);
    let other = solve_window_from(&p, p.vacuum_wave_iterate(), cfg()).unwrap();
    assert!(other.converged());
    assert!(sup_diff(&other.fields.e, &sol.fields.e) <= 10.0 * TOL);
    assert!(sup_diff(&other.fields.a, &sol.fields.a) <= 10.0 * TOL);
}

/// Rolls every length-`nx` row of `v` by one node: `out[j] = v[j - 1]`.
fn roll_rows(v: &[f64], nx: usize) -> Vec<f64> {
    v.chunks(nx)
        .flat_map(|row| (0..nx).map(move |j| row[(j + nx - 1) % nx]))
        .collect()
}

fn roll_dist(f: &DistSlice<f64>) -> Vec<f64> {
    let g = f.grid();
    let (nx, np) = (g.nx(), g.np());
    (0..nx).flat_map(|j| f.row((j + nx - 1) % nx).to_vec()).take(nx * np).collect()
}

#[test]
fn shifting_the_data_by_one_node_shifts_the_solution() {
    let g = grid();
    let (_, sol) = solved(ModelVariant::Qr);
    let d = data(0.0);
    let nx = g.nx();
    let shifted = Data {
        f0: DistSlice::new(g, roll_dist(&d.f0)).unwrap(),
        a0: roll_rows(&d.a0, nx),
        adot0: roll_rows(&d.adot0, nx),
        n_ext: roll_rows(&d.n_ext, nx),
    };
    let other = solve_window(&problem(&shifted, ModelVariant::Qr), cfg()).unwrap();
    assert!(other.converged());
    let fields: [(&str, fn(&FieldHistory<f64>) -> &Vec<f64>); 3] =
        [("E", |h| &h.e), ("A", |h| &h.a), ("dxxA", |h| &h.dxxa)];
    for (name, get) in fields {
        let err = sup_diff(get(&other.fields), &roll_rows(get(&sol.fields), nx));
        assert!(err <= 1e-12, "{name} {err}");
    }
    let last = sol.nt();
    let err = sup_diff(other.dist[last].values(), &roll_dist(&sol.dist[last]));
    assert!(err <= 1e-12, "f {err}");
}

#[test]
fn converged_trace_decays() {
    let (_, sol) = solved(ModelVariant::Qr);
    let u = sol.trace.u();
    // after the first two iterations u_k only goes down
    for w in u[2..].windows(2) {
        assert!(w[1] <= w[0], "{u:?}");
    }
    assert!(*u.last().unwrap() <= TOL);
}
