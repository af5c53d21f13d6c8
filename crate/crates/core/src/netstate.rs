//! Discrete networks: the spline curve `γ = (γ₁..γ_q)` on `[0, q]` (knots `x_l = l`) and, in
//! fitting mode, the penalty arcs `χ₁..χ_{q−1}` with `χ_l` on `[l−1, l]` running from `p_l` to
//! the junction `γ(x_l)`.
//!
//! Every arc owns its `N + 1` nodes; junction values are duplicated and kept equal by the flow.

use serde::{Deserialize, Serialize};

use crate::calculus::{self, StencilSet};
use crate::error::{Result, RsfError};
use crate::manifold::{AmbientVector, EmbeddedManifold};
use crate::vecops::{dist, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interpolation,
    Fitting,
}

/// Clamped derivative data `v^μ`, `μ = 1..k−1`, at `x₀` and `x_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointDerivatives {
    pub start: Vec<AmbientVector>,
    pub end: Vec<AmbientVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationProblem {
    pub manifold: EmbeddedManifold,
    pub points: Vec<AmbientVector>,
    pub endpoint_derivatives: EndpointDerivatives,
    pub k: usize,
    pub lambda: f64,
    pub sigma: f64,
}

impl InterpolationProblem {
    pub fn new(
        manifold: EmbeddedManifold,
        points: Vec<AmbientVector>,
        endpoint_derivatives: EndpointDerivatives,
        k: usize,
        lambda: f64,
        sigma: f64,
    ) -> Result<Self> {
        if k < 2 {
            return Err(RsfError::InvalidArity(format!("k must be ≥ 2, got {k}")));
        }
        if points.len() < 2 {
            return Err(RsfError::InvalidArity("need at least two points (q ≥ 1)".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(RsfError::InvalidConfig(format!("lambda must be ≥ 0, got {lambda}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(RsfError::InvalidConfig(format!("sigma must be > 0, got {sigma}")));
        }
        let n = manifold.ambient_dim();
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(RsfError::InvalidArity(format!("point {i} has dimension {}, expected {n}", p.len())));
            }
            let v = manifold.constraint_violation(p);
            if !(v <= 10.0 * manifold.tolerance()) {
                return Err(RsfError::InvalidConfig(format!(
                    "point {i} is off the manifold (constraint violation {v:.3e})"
                )));
            }
        }
        let q = points.len() - 1;
        for (side, data, p) in [
            ("start", &endpoint_derivatives.start, &points[0]),
            ("end", &endpoint_derivatives.end, &points[q]),
        ] {
            if data.len() != k - 1 {
                return Err(RsfError::InfeasibleBoundaryData(format!(
                    "{side}: expected {} derivative vectors, got {}",
                    k - 1,
                    data.len()
                )));
            }
            for (mu, v) in data.iter().enumerate() {
                if v.len() != n {
                    return Err(RsfError::InfeasibleBoundaryData(format!("{side} v^{}: wrong dimension", mu + 1)));
                }
                let t = manifold.project_tangent(p, v)?;
                if dist(&t, v) > 10.0 * manifold.tolerance() * (1.0 + norm(v)) {
                    return Err(RsfError::InfeasibleBoundaryData(format!(
                        "{side} v^{} is not tangent to M at the endpoint",
                        mu + 1
                    )));
                }
            }
        }
        Ok(Self { manifold, points, endpoint_derivatives, k, lambda, sigma })
    }

    /// Number of arcs `q`.
    pub fn q(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.manifold.ambient_dim()
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcKind {
    Gamma,
    Chi,
}

impl ArcKind {
    pub fn label(self) -> &'static str {
        match self {
            ArcKind::Gamma => "gamma",
            ArcKind::Chi => "chi",
        }
    }
}

/// Samples of one arc at the uniform nodes `x_{l−1} + j/N`, `j = 0..N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcGrid {
    /// 1-based arc index `l`.
    pub arc_index: usize,
    pub samples: Vec<AmbientVector>,
}

impl ArcGrid {
    pub fn new(arc_index: usize, samples: Vec<AmbientVector>) -> Self {
        Self { arc_index, samples }
    }

    pub fn from_fn(arc_index: usize, n: usize, f: impl Fn(f64) -> AmbientVector) -> Self {
        let x0 = (arc_index - 1) as f64;
        let samples = (0..=n).map(|j| f(x0 + j as f64 / n as f64)).collect();
        Self { arc_index, samples }
    }

    /// Number of intervals `N`.
    pub fn n(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn x(&self, j: usize) -> f64 {
        (self.arc_index - 1) as f64 + j as f64 / self.n() as f64
    }

    pub fn first(&self) -> &[f64] {
        &self.samples[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.samples[self.n()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub gamma_arcs: Vec<ArcGrid>,
    pub chi_arcs: Vec<ArcGrid>,
    pub t: f64,
}

impl NetworkState {
    pub fn q(&self) -> usize {
        self.gamma_arcs.len()
    }

    pub fn n(&self) -> usize {
        self.gamma_arcs[0].n()
    }

    pub fn mode(&self) -> Mode {
        if self.chi_arcs.is_empty() {
            Mode::Interpolation
        } else {
            Mode::Fitting
        }
    }

    /// Largest constraint violation over all samples.
    pub fn constraint_violation(&self, m: &EmbeddedManifold) -> f64 {
        self.gamma_arcs
            .iter()
            .chain(&self.chi_arcs)
            .flat_map(|a| a.samples.iter())
            .map(|p| m.constraint_violation(p))
            .fold(0.0, f64::max)
    }

    /// Max-norm distance between the γ samples of two states with equal layout.
    pub fn gamma_distance(&self, other: &NetworkState) -> f64 {
        self.gamma_arcs
            .iter()
            .zip(&other.gamma_arcs)
            .flat_map(|(a, b)| a.samples.iter().zip(&b.samples))
            .flat_map(|(p, r)| p.iter().zip(r).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| RsfError::InvalidConfig(format!("state JSON: {e}")))
    }

    /// CSV rows `arc_type, arc_index, x, coord_1..coord_n, t` (without header).
    pub fn csv_rows(&self, out: &mut String) {
        use std::fmt::Write;
        for (kind, arcs) in [(ArcKind::Gamma, &self.gamma_arcs), (ArcKind::Chi, &self.chi_arcs)] {
            for arc in arcs {
                for (j, p) in arc.samples.iter().enumerate() {
                    let _ = write!(out, "{},{},{}", kind.label(), arc.arc_index, arc.x(j));
                    for c in p {
                        let _ = write!(out, ",{c}");
                    }
                    let _ = writeln!(out, ",{}", self.t);
                }
            }
        }
    }

    pub fn csv_header(dim: usize) -> String {
        let mut h = String::from("arc_type,arc_index,x");
        for i in 1..=dim {
            h.push_str(&format!(",coord_{i}"));
        }
        h.push_str(",t\n");
        h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitStrategy {
    GeodesicPolyline,
    /// Samples of the Euclidean oracle spline.
    OracleSpline,
    UserSupplied(NetworkState),
}

/// Initial network: χ arcs are the constant maps `χ_l ≡ p_l`.
pub fn build_initial_state(
    problem: &InterpolationProblem,
    mode: Mode,
    n: usize,
    init: &InitStrategy,
) -> Result<NetworkState> {
    let m = &problem.manifold;
    for (side, data, p) in [
        ("start", &problem.endpoint_derivatives.start, &problem.points[0]),
        ("end", &problem.endpoint_derivatives.end, &problem.points[problem.q()]),
    ] {
        for (mu, v) in data.iter().enumerate() {
            let t = m.project_tangent(p, v)?;
            if dist(&t, v) > 10.0 * m.tolerance() * (1.0 + norm(v)) {
                return Err(RsfError::InfeasibleBoundaryData(format!("{side} v^{} not tangent", mu + 1)));
            }
        }
    }
    if n < 2 {
        return Err(RsfError::GridTooCoarse(format!("N = {n}")));
    }
    let q = problem.q();
    let gamma_arcs = match init {
        InitStrategy::GeodesicPolyline => {
            let mut arcs = Vec::with_capacity(q);
            for l in 1..=q {
                let (a, b) = (&problem.points[l - 1], &problem.points[l]);
                let mut samples = Vec::with_capacity(n + 1);
                for j in 0..=n {
                    samples.push(match j {
                        0 => a.clone(),
                        j if j == n => b.clone(),
                        _ => m.geodesic(a, b, j as f64 / n as f64)?,
                    });
                }
                arcs.push(ArcGrid::new(l, samples));
            }
            arcs
        }
        InitStrategy::OracleSpline => {
            if !m.is_euclidean() {
                return Err(RsfError::OracleUnavailable("oracle splines exist only in Euclidean space".into()));
            }
            let pp = if problem.lambda > 0.0 {
                crate::oracle::lambda_spline_ode(problem)?
            } else {
                crate::oracle::euclidean_spline(problem)?
            };
            let mut arcs = pp.sample(n);
            // exact Dirichlet data at nodes
            for (l, arc) in arcs.iter_mut().enumerate() {
                arc.samples[0] = problem.points[l].clone();
                arc.samples[n] = problem.points[l + 1].clone();
            }
            arcs
        }
        InitStrategy::UserSupplied(state) => {
            if state.q() != q || state.gamma_arcs.iter().any(|a| a.n() != n) {
                return Err(RsfError::InvalidArity("user-supplied state has the wrong layout".into()));
            }
            state.gamma_arcs.clone()
        }
    };
    let chi_arcs = match (mode, init) {
        (Mode::Interpolation, _) => Vec::new(),
        (Mode::Fitting, InitStrategy::UserSupplied(state)) if state.chi_arcs.len() == q - 1 => state.chi_arcs.clone(),
        (Mode::Fitting, _) => (1..q).map(|l| ArcGrid::new(l, vec![problem.points[l].clone(); n + 1])).collect(),
    };
    Ok(NetworkState { gamma_arcs, chi_arcs, t: 0.0 })
}

/// `D^{μ−1}∂γ_{l+1}(x_l) − D^{μ−1}∂γ_l(x_l)` from one-sided stencils, `1 ≤ l ≤ q−1`, `1 ≤ μ ≤ 2k−1`.
pub fn junction_jump(
    m: &EmbeddedManifold,
    state: &NetworkState,
    stencils: &StencilSet,
    l: usize,
    mu: usize,
) -> Result<AmbientVector> {
    let q = state.q();
    if l < 1 || l >= q {
        return Err(RsfError::IndexOutOfRange(format!("junction l = {l} not in 1..{}", q.saturating_sub(1))));
    }
    if mu < 1 || mu > stencils.max_derivative() {
        return Err(RsfError::IndexOutOfRange(format!("μ = {mu} not in 1..{}", stencils.max_derivative())));
    }
    let left = &state.gamma_arcs[l - 1];
    let right = &state.gamma_arcs[l];
    let a = calculus::covariant_derivative_at(m, stencils, left, left.n(), mu - 1)?;
    let b = calculus::covariant_derivative_at(m, stencils, right, 0, mu - 1)?;
    Ok(b.iter().zip(&a).map(|(x, y)| x - y).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ArityViolation(String),
    OffManifold { arc: ArcKind, arc_index: usize, node: usize, violation: f64 },
    DirichletViolation { arc: ArcKind, arc_index: usize, node: usize, error: f64 },
    ConcurrencyViolation { junction: usize, error: f64 },
}

/// Nodal admissibility: arity, on-manifold samples, Dirichlet and concurrency conditions.
pub fn validate_admissibility(problem: &InterpolationProblem, state: &NetworkState, mode: Mode) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = &problem.manifold;
    let q = problem.q();
    let tol = 10.0 * m.tolerance();
    if state.gamma_arcs.len() != q {
        out.push(Violation::ArityViolation(format!("{} γ arcs, expected {q}", state.gamma_arcs.len())));
        return out;
    }
    let expected_chi = if mode == Mode::Fitting { q - 1 } else { 0 };
    if state.chi_arcs.len() != expected_chi {
        out.push(Violation::ArityViolation(format!(
            "{} χ arcs, expected {expected_chi}",
            state.chi_arcs.len()
        )));
        return out;
    }
    let n = state.gamma_arcs[0].n();
    for (kind, arcs) in [(ArcKind::Gamma, &state.gamma_arcs), (ArcKind::Chi, &state.chi_arcs)] {
        for (i, arc) in arcs.iter().enumerate() {
            if arc.arc_index != i + 1 || arc.n() != n || arc.samples.iter().any(|p| p.len() != problem.dim()) {
                out.push(Violation::ArityViolation(format!("{} arc {} has inconsistent layout", kind.label(), i + 1)));
                return out;
            }
            for (j, p) in arc.samples.iter().enumerate() {
                let v = m.constraint_violation(p);
                if !(v <= tol) {
                    out.push(Violation::OffManifold { arc: kind, arc_index: i + 1, node: j, violation: v });
                }
            }
        }
    }
    let mut dirichlet = |kind, l: usize, node: usize, sample: &[f64], target: &[f64]| {
        let e = dist(sample, target);
        if !(e <= tol) {
            out.push(Violation::DirichletViolation { arc: kind, arc_index: l, node, error: e });
        }
    };
    dirichlet(ArcKind::Gamma, 1, 0, state.gamma_arcs[0].first(), &problem.points[0]);
    dirichlet(ArcKind::Gamma, q, n, state.gamma_arcs[q - 1].last(), &problem.points[q]);
    match mode {
        Mode::Interpolation => {
            for l in 1..q {
                dirichlet(ArcKind::Gamma, l, n, state.gamma_arcs[l - 1].last(), &problem.points[l]);
                dirichlet(ArcKind::Gamma, l + 1, 0, state.gamma_arcs[l].first(), &problem.points[l]);
            }
        }
        Mode::Fitting => {
            for l in 1..q {
                dirichlet(ArcKind::Chi, l, 0, state.chi_arcs[l - 1].first(), &problem.points[l]);
            }
        }
    }
    if mode == Mode::Fitting {
        for l in 1..q {
            let g = state.gamma_arcs[l - 1].last();
            let e = dist(g, state.gamma_arcs[l].first()).max(dist(g, state.chi_arcs[l - 1].last()));
            if !(e <= tol) {
                out.push(Violation::ConcurrencyViolation { junction: l, error: e });
            }
        }
    }
    out
}
