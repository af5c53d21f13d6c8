//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rsf::flow::{Flow, FlowConfig, RunOutput, Scheme, TimeStep};
use rsf::manifold::{AmbientVector, EmbeddedManifold};
use rsf::netstate::{build_initial_state, ArcGrid, EndpointDerivatives, InitStrategy, InterpolationProblem, Mode, NetworkState};
use rsf::calculus::Direction;
use rsf::vecops::{dist, norm};

/// Smooth curve on S² used to generate data points, clamps and an admissible initial datum.
pub fn sphere_curve(x: f64) -> AmbientVector {
    let v = [(0.6 * x).cos(), (0.6 * x).sin(), 0.3 * (1.7 * x).sin()];
    let r = norm(&v);
    v.iter().map(|a| a / r).collect()
}

fn sphere_curve_derivative(x: f64) -> AmbientVector {
    let h = 1e-4;
    // fourth-order central difference of an analytic curve
    let f = |s: f64| sphere_curve(x + s * h);
    (0..3).map(|c| (-f(2.0)[c] + 8.0 * f(1.0)[c] - 8.0 * f(-1.0)[c] + f(-2.0)[c]) / (12.0 * h)).collect()
}

/// Sphere problem with `p_l = c(l)` and clamps `v¹ = c'(0), c'(q)` (k = 2).
pub fn sphere_problem(q: usize, sigma: f64) -> InterpolationProblem {
    let m = EmbeddedManifold::sphere(2);
    let pts: Vec<AmbientVector> = (0..=q).map(|l| sphere_curve(l as f64)).collect();
    let t0 = m.project_tangent(&pts[0], &sphere_curve_derivative(0.0)).unwrap();
    let t1 = m.project_tangent(&pts[q], &sphere_curve_derivative(q as f64)).unwrap();
    InterpolationProblem::new(m, pts, EndpointDerivatives { start: vec![t0], end: vec![t1] }, 2, 0.0, sigma).unwrap()
}

/// Samples of the generating curve with constant χ arcs: admissible for the fitting flow.
pub fn sphere_initial(problem: &InterpolationProblem, n: usize) -> NetworkState {
    let q = problem.q();
    let gamma: Vec<ArcGrid> = (1..=q)
        .map(|l| {
            let mut a = ArcGrid::from_fn(l, n, sphere_curve);
            a.samples[0] = problem.points[l - 1].clone();
            a.samples[n] = problem.points[l].clone();
            a
        })
        .collect();
    let user = NetworkState { gamma_arcs: gamma, chi_arcs: vec![], t: 0.0 };
    build_initial_state(problem, Mode::Fitting, n, &InitStrategy::UserSupplied(user)).unwrap()
}

pub fn flat_problem(points: Vec<Vec<f64>>, v0: Vec<f64>, v1: Vec<f64>) -> InterpolationProblem {
    let m = EmbeddedManifold::euclidean(points[0].len());
    InterpolationProblem::new(m, points, EndpointDerivatives { start: vec![v0], end: vec![v1] }, 2, 0.0, 1.0).unwrap()
}

/// Euclidean k = 2 fixtures with `q` arcs.
pub fn flat_fixture(q: usize) -> InterpolationProblem {
    let pts: Vec<Vec<f64>> = (0..=q).map(|l| vec![l as f64, [0.0, 0.5, -0.25, 0.75][l % 4]]).collect();
    flat_problem(pts, vec![1.0, 0.0], vec![1.0, 0.2])
}

pub fn imex_config(problem: &InterpolationProblem, mode: Mode, n: usize, dt: f64, t_max: f64, stop_tol: f64) -> FlowConfig {
    let mut cfg = FlowConfig::for_problem(problem, mode, n);
    cfg.scheme = Scheme::Imex;
    cfg.dt = TimeStep::Fixed(dt);
    cfg.t_max = t_max;
    cfg.stop_tol = stop_tol;
    cfg.record_every = 1;
    cfg
}

pub fn sup_distance(a: &[ArcGrid], b: &[ArcGrid]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.samples.iter().zip(&y.samples).map(|(p, q)| dist(p, q)))
        .fold(0.0, f64::max)
}

/// Largest increase `E_{i+1} − E_i` over consecutive records.
pub fn max_energy_increase(out: &RunOutput) -> f64 {
    out.records.windows(2).map(|w| w[1].energy.total - w[0].energy.total).fold(f64::NEG_INFINITY, f64::max)
}

pub fn run(flow: &Flow, s0: &NetworkState) -> RunOutput {
    flow.run(s0).unwrap()
}

/// A fitting network with γ off the data and non-geodesic χ arcs: every energy term is active.
pub fn generic_network(problem: &InterpolationProblem, n: usize) -> NetworkState {
    let m = &problem.manifold;
    let q = problem.q();
    let g = |x: f64| m.project_point(&sphere_curve(x + 0.1 * x.sin())).unwrap();
    let gamma: Vec<ArcGrid> = (1..=q).map(|l| ArcGrid::from_fn(l, n, g)).collect();
    let chi = (1..q)
        .map(|l| {
            let end = gamma[l].first().to_vec();
            let samples = (0..=n)
                .map(|j| {
                    let y = j as f64 / n as f64;
                    m.geodesic(&problem.points[l], &end, y + 0.3 * y * (1.0 - y)).unwrap()
                })
                .collect();
            ArcGrid::new(l, samples)
        })
        .collect();
    NetworkState { gamma_arcs: gamma, chi_arcs: chi, t: 0.0 }
}

/// Random smooth admissible direction: tangent; vanishing to order `k` at the outer ends (so the
/// point and derivative clamps are preserved) and at the data ends of χ; smooth across junctions
/// and matching γ at the χ free ends.
pub fn random_direction(m: &EmbeddedManifold, state: &NetworkState, k: usize, rng: &mut impl rand::Rng) -> Direction {
    let q = state.q() as f64;
    let dim = m.ambient_dim();
    let mut modes = |count: usize| -> Vec<(Vec<f64>, f64, f64)> {
        (0..count)
            .map(|i| ((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), (i + 1) as f64 * rng.gen_range(0.3..0.8), rng.gen_range(0.0..6.3)))
            .collect()
    };
    let field = |ms: &[(Vec<f64>, f64, f64)], x: f64| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (a, f, ph) in ms {
            let s = (f * x + ph).sin();
            v.iter_mut().zip(a).for_each(|(vi, ai)| *vi += ai * s);
        }
        v
    };
    let gm = modes(3);
    let wg = |x: f64| -> Vec<f64> { field(&gm, x).into_iter().map(|c| c * (x * (q - x)).powi(k as i32)).collect() };
    let gamma: Vec<Vec<AmbientVector>> = state
        .gamma_arcs
        .iter()
        .map(|a| (0..=a.n()).map(|j| m.project_tangent(&a.samples[j], &wg(a.x(j))).unwrap()).collect())
        .collect();
    let chi: Vec<Vec<AmbientVector>> = state
        .chi_arcs
        .iter()
        .map(|a| {
            let cm = modes(2);
            let tip = wg(a.arc_index as f64);
            (0..=a.n())
                .map(|j| {
                    let y = j as f64 / a.n() as f64;
                    let v: Vec<f64> = field(&cm, y).iter().zip(&tip).map(|(r, t)| y * t + y * (1.0 - y) * r).collect();
                    m.project_tangent(&a.samples[j], &v).unwrap()
                })
                .collect()
        })
        .collect();
    Direction { gamma, chi }
}
