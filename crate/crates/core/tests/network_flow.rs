//! Network construction, flow runs and the Euclidean oracle.

mod common;

use common::*;
use proptest::prelude::*;
use rsf::calculus::{euler_lagrange, StencilSet};
use rsf::flow::{self, Flow, StopReason};
use rsf::manifold::EmbeddedManifold;
use rsf::netstate::{
    build_initial_state, junction_jump, validate_admissibility, ArcGrid, EndpointDerivatives, InitStrategy, InterpolationProblem, Mode,
    NetworkState, Violation,
};
use rsf::oracle::euclidean_spline;
use rsf::vecops::{dist, norm};

fn sphere_point(a: f64, b: f64) -> Vec<f64> {
    vec![a.cos() * b.cos(), a.sin() * b.cos(), b.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Geodesic polylines through data in a hemisphere are admissible in both modes.
    #[test]
    fn polyline_init_is_admissible(angles in prop::collection::vec((-1.0..1.0f64, -0.7..0.7f64), 2..6), n in 4usize..24) {
        let m = EmbeddedManifold::sphere(2);
        let pts: Vec<Vec<f64>> = angles.iter().map(|&(a, b)| sphere_point(a, b)).collect();
        let q = pts.len() - 1;
        let z = vec![vec![0.0; 3]];
        let problem = InterpolationProblem::new(m, pts, EndpointDerivatives { start: z.clone(), end: z }, 2, 0.0, 0.5).unwrap();
        for mode in [Mode::Interpolation, Mode::Fitting] {
            let s = build_initial_state(&problem, mode, n, &InitStrategy::GeodesicPolyline).unwrap();
            prop_assert_eq!(s.q(), q);
            prop_assert!(validate_admissibility(&problem, &s, mode).is_empty());
        }
    }

    /// Reversing the parametrisation maps the μ-th jump at `x_l` to `(−1)^{μ+1}` times the jump
    /// of the reversed network at `x_{q−l}`.
    #[test]
    fn jump_orientation_antisymmetry(c in prop::collection::vec(-1.0..1.0f64, 6), sphere in any::<bool>()) {
        let m = if sphere { EmbeddedManifold::sphere(2) } else { EmbeddedManifold::euclidean(3) };
        let n = 24;
        let arc = |l: usize, a: f64, b: f64| {
            ArcGrid::from_fn(l, n, |x| {
                let v = sphere_point(0.5 * x + a * (x - l as f64 + 1.0).powi(2), 0.2 * x + b * (x - l as f64).powi(3));
                m.project_point(&v).unwrap()
            })
        };
        let state = NetworkState { gamma_arcs: vec![arc(1, c[0], c[1]), arc(2, c[2], c[3]), arc(3, c[4], c[5])], chi_arcs: vec![], t: 0.0 };
        let q = state.q();
        let reversed = NetworkState {
            gamma_arcs: (1..=q)
                .map(|l| {
                    let mut s = state.gamma_arcs[q - l].samples.clone();
                    s.reverse();
                    ArcGrid::new(l, s)
                })
                .collect(),
            chi_arcs: vec![],
            t: 0.0,
        };
        let st = StencilSet::new(n, 3, 4).unwrap();
        for l in 1..q {
            for mu in 1..=3 {
                let a = junction_jump(&m, &state, &st, l, mu).unwrap();
                let b = junction_jump(&m, &reversed, &st, q - l, mu).unwrap();
                let s = if mu % 2 == 1 { 1.0 } else { -1.0 };
                let e: f64 = a.iter().zip(&b).map(|(x, y)| (x - s * y).abs()).fold(0.0, f64::max);
                prop_assert!(e <= 1e-9 * (1.0 + norm(&a)), "l {} μ {}: {:?} vs {:?}", l, mu, a, b);
            }
        }
    }
}

#[test]
fn off_manifold_and_dirichlet_violations_reported() {
    let problem = sphere_problem(2, 0.5);
    let mut s = build_initial_state(&problem, Mode::Fitting, 8, &InitStrategy::GeodesicPolyline).unwrap();
    s.gamma_arcs[0].samples[3][0] += 1e-3;
    s.chi_arcs[0].samples[0] = s.gamma_arcs[1].samples[4].clone();
    let v = validate_admissibility(&problem, &s, Mode::Fitting);
    assert!(v.iter().any(|x| matches!(x, Violation::OffManifold { arc_index: 1, node: 3, .. })));
    assert!(v.iter().any(|x| matches!(x, Violation::DirichletViolation { arc_index: 1, node: 0, .. })));
    assert!(matches!(validate_admissibility(&problem, &s, Mode::Interpolation)[0], Violation::ArityViolation(_)));
}

#[test]
fn state_json_round_trip_preserves_bits() {
    let problem = sphere_problem(3, 0.5);
    let s = sphere_initial(&problem, 16);
    let back = NetworkState::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn oracle_is_admissible_and_critical() {
    let problem = flat_fixture(3);
    let n = 64;
    let pp = euclidean_spline(&problem).unwrap();
    let s = build_initial_state(&problem, Mode::Interpolation, n, &InitStrategy::OracleSpline).unwrap();
    assert!(validate_admissibility(&problem, &s, Mode::Interpolation).is_empty());
    let st = StencilSet::new(n, 4, 4).unwrap();
    for arc in &s.gamma_arcs {
        let el = euler_lagrange(&problem.manifold, arc, &st, 2, 0.0).unwrap();
        assert!(el.iter().map(|v| norm(v)).fold(0.0, f64::max) <= 1e-6);
    }
    // C² across knots, clamps at the ends
    for l in 1..3 {
        let x = l as f64;
        let (a, b) = (pp.eval(x - 1e-12, 2), pp.eval(x + 1e-12, 2));
        assert!(dist(&a, &b) <= 1e-8);
    }
    assert!(dist(&pp.eval(0.0, 1), &[1.0, 0.0]) <= 1e-12);
}

#[test]
fn interpolation_flow_converges_monotonically() {
    let problem = flat_fixture(2);
    let cfg = imex_config(&problem, Mode::Interpolation, 32, 0.01, 20.0, 1e-8);
    let s0 = build_initial_state(&problem, Mode::Interpolation, 32, &InitStrategy::GeodesicPolyline).unwrap();
    let out = flow::run(&problem, &s0, &cfg).unwrap();
    assert_eq!(out.stop, StopReason::Converged);
    let e0 = out.initial_energy;
    assert!(max_energy_increase(&out) <= 10.0 * f64::EPSILON * e0);
    assert!(validate_admissibility(&problem, &out.state, Mode::Interpolation).is_empty());
    let oracle = euclidean_spline(&problem).unwrap().sample(32);
    assert!(sup_distance(&out.state.gamma_arcs, &oracle) <= 1e-3);
}

#[test]
fn sphere_fitting_flow_stays_on_manifold() {
    let problem = sphere_problem(2, 0.5);
    let s0 = sphere_initial(&problem, 16);
    let cfg = imex_config(&problem, Mode::Fitting, 16, 0.005, 0.5, 1e-10);
    let f = Flow::new(&problem, &cfg).unwrap();
    let out = run(&f, &s0);
    assert!(out.records.iter().all(|r| r.constraint_violation <= 1e-10));
    assert!(max_energy_increase(&out) <= 10.0 * f64::EPSILON * out.initial_energy);
    assert!(validate_admissibility(&problem, &out.state, Mode::Fitting).is_empty());
    assert!(out.state.t > 0.0);
}

#[test]
fn inadmissible_start_rejected() {
    let problem = flat_fixture(2);
    let cfg = imex_config(&problem, Mode::Interpolation, 16, 0.01, 1.0, 1e-8);
    let mut s0 = build_initial_state(&problem, Mode::Interpolation, 16, &InitStrategy::GeodesicPolyline).unwrap();
    s0.gamma_arcs[1].samples[0][1] += 0.1;
    assert!(flow::run(&problem, &s0, &cfg).is_err());
}

#[test]
fn energy_identity_residual_shrinks_with_dt() {
    let problem = flat_fixture(2);
    let n = 32;
    let s0 = build_initial_state(&problem, Mode::Fitting, n, &InitStrategy::GeodesicPolyline).unwrap();
    let res = |dt: f64| {
        let cfg = imex_config(&problem, Mode::Fitting, n, dt, 1.0, 1e-8);
        let f = Flow::new(&problem, &cfg).unwrap();
        let (s1, _) = f.step(&f.project_onto_constraints(&s0).unwrap()).unwrap();
        let (s2, r) = f.step(&s1).unwrap();
        let _ = s2;
        r.energy_identity_residual / r.z1.max(1e-300)
    };
    let (a, b) = (res(2e-4), res(1e-4));
    assert!(b < a, "{a:e} → {b:e}");
}
