//! Order-zero compatibility of fitting-mode initial data, evaluated on the grid.
//!
//! Each line carries a residual and a threshold. Exact conditions (point values) allow the
//! manifold tolerance; derivative conditions allow a truncation term `C·h^a·scale` plus the
//! rounding bound of the stencils involved.

use serde::{Deserialize, Serialize};

use crate::calculus::{chi_acceleration_at, euler_lagrange_at, StencilSet, DEFAULT_ORDER};
use crate::error::{Result, RsfError};
use crate::flow::boundary::{Condition, Context};
use crate::netstate::{ArcGrid, InterpolationProblem, NetworkState};
use crate::vecops::{dist, norm, norm_inf};

/// Constant of the truncation allowance `C·h^a`.
pub const TRUNCATION_FACTOR: f64 = 100.0;
const NOISE_FACTOR: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Layout,
    EndOperator,
    ChiStart,
    Coupling,
    Dirichlet,
    Clamp,
    Concurrency,
    Jump,
    Balancing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatLine {
    pub kind: LineKind,
    pub label: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub order: usize,
    pub k: usize,
    pub n: usize,
    pub h: f64,
    pub stencil_order: usize,
    pub lines: Vec<CompatLine>,
    pub all_pass: bool,
}

impl CompatibilityReport {
    pub fn failures(&self) -> Vec<&CompatLine> {
        self.lines.iter().filter(|l| !l.pass).collect()
    }

    pub fn of_kind(&self, kind: LineKind) -> impl Iterator<Item = &CompatLine> {
        self.lines.iter().filter(move |l| l.kind == kind)
    }
}

struct Builder {
    lines: Vec<CompatLine>,
}

impl Builder {
    fn push(&mut self, kind: LineKind, label: String, residual: f64, threshold: f64) {
        let pass = residual.is_finite() && residual <= threshold;
        self.lines.push(CompatLine { kind, label, residual, threshold, pass });
    }
}

fn scale(a: &ArcGrid) -> f64 {
    a.samples.iter().map(|p| norm_inf(p)).fold(1.0, f64::max)
}

/// Compatibility of order `order`; only `0` is supported.
pub fn compatibility(problem: &InterpolationProblem, state0: &NetworkState, order: usize) -> Result<CompatibilityReport> {
    if order != 0 {
        return Err(RsfError::UnsupportedOrder(format!(
            "compatibility of order {order}: only order zero is checked (higher orders involve time \
             derivatives of the prescribed penalty arcs)"
        )));
    }
    Ok(compatibility_order_zero(problem, state0))
}

pub fn compatibility_order_zero(problem: &InterpolationProblem, state0: &NetworkState) -> CompatibilityReport {
    let (k, q) = (problem.k, problem.q());
    let n = state0.gamma_arcs.first().map(|a| a.n()).unwrap_or(0);
    let mut b = Builder { lines: Vec::new() };
    let report = |lines: Vec<CompatLine>, h: f64| {
        let all_pass = lines.iter().all(|l| l.pass);
        CompatibilityReport { order: 0, k, n, h, stencil_order: DEFAULT_ORDER, lines, all_pass }
    };
    let layout_ok = state0.gamma_arcs.len() == q
        && state0.chi_arcs.len() == q - 1
        && state0
            .gamma_arcs
            .iter()
            .chain(&state0.chi_arcs)
            .all(|a| a.n() == n && a.samples.iter().all(|p| p.len() == problem.dim()));
    let st = if layout_ok { StencilSet::new(n, 2 * k, DEFAULT_ORDER).ok() } else { None };
    let Some(st) = st else {
        b.push(
            LineKind::Layout,
            format!("fitting layout: {q} γ arcs and {} χ arcs with N = {n} nodes", q.saturating_sub(1)),
            f64::INFINITY,
            0.0,
        );
        return report(b.lines, f64::NAN);
    };
    match evaluate(problem, state0, &st, &mut b) {
        Ok(()) => {}
        Err(e) => b.push(LineKind::Layout, format!("evaluation failed: {e}"), f64::INFINITY, 0.0),
    }
    report(b.lines, 1.0 / n as f64)
}

fn evaluate(problem: &InterpolationProblem, state: &NetworkState, st: &StencilSet, b: &mut Builder) -> Result<()> {
    let m = &problem.manifold;
    let (k, q, lambda, sigma) = (problem.k, problem.q(), problem.lambda, problem.sigma);
    let n = st.n();
    let h = 1.0 / n as f64;
    let ha = h.powi(st.order() as i32);
    let s2 = sigma * sigma;
    let exact = |s: f64| 10.0 * m.tolerance() * (1.0 + s);
    let deriv = |d: usize, j: usize, a: &ArcGrid| TRUNCATION_FACTOR * ha * scale(a) + NOISE_FACTOR * st.rounding_bound(d, j, scale(a));
    let ctx = Context { m, st, problem, k, sigma };

    // 𝓛(γ₀) at the outer ends
    for (label, arc, j) in [("x_0", &state.gamma_arcs[0], 0), ("x_q", &state.gamma_arcs[q - 1], n)] {
        let r = norm(&euler_lagrange_at(m, st, arc, j, k, lambda)?);
        b.push(LineKind::EndOperator, format!("L(γ0)({label}) = 0"), r, deriv(2 * k, j, arc));
    }
    for l in 1..q {
        let chi = &state.chi_arcs[l - 1];
        let r = s2 * norm(&chi_acceleration_at(m, st, chi, 0)?);
        b.push(LineKind::ChiStart, format!("σ²D∂χ_{l}(x_{}) = 0", l - 1), r, s2 * deriv(2, 0, chi));
    }
    for l in 1..q {
        let (left, right, chi) = (&state.gamma_arcs[l - 1], &state.gamma_arcs[l], &state.chi_arcs[l - 1]);
        let la = euler_lagrange_at(m, st, left, n, k, lambda)?;
        let lb = euler_lagrange_at(m, st, right, 0, k, lambda)?;
        let c: Vec<f64> = chi_acceleration_at(m, st, chi, n)?.iter().map(|x| s2 * x).collect();
        let tc = s2 * deriv(2, n, chi);
        b.push(
            LineKind::Coupling,
            format!("L(γ_{l})(x_{l}) = σ²D∂χ_{l}(x_{l})"),
            dist(&la, &c),
            deriv(2 * k, n, left) + tc,
        );
        b.push(
            LineKind::Coupling,
            format!("σ²D∂χ_{l}(x_{l}) = L(γ_{})(x_{l})", l + 1),
            dist(&c, &lb),
            deriv(2 * k, 0, right) + tc,
        );
    }
    let g0 = &state.gamma_arcs[0];
    let gq = &state.gamma_arcs[q - 1];
    b.push(LineKind::Dirichlet, "γ0(x_0) = p_0".into(), dist(g0.first(), &problem.points[0]), exact(scale(g0)));
    b.push(LineKind::Dirichlet, "γ0(x_q) = p_q".into(), dist(gq.last(), &problem.points[q]), exact(scale(gq)));
    for l in 1..q {
        let chi = &state.chi_arcs[l - 1];
        b.push(
            LineKind::Dirichlet,
            format!("χ_{l}(x_{}) = p_{l}", l - 1),
            dist(chi.first(), &problem.points[l]),
            exact(scale(chi)),
        );
    }
    for end in [false, true] {
        let (arc, j, at) = if end { (gq, n, "x_q") } else { (g0, 0, "x_0") };
        for mu in 1..k {
            let (r, noise) = ctx.residual(state, Condition::Clamp { end, mu })?;
            b.push(
                LineKind::Clamp,
                format!("D^{}∂γ({at}) = v^{mu}", mu - 1),
                norm(&r),
                TRUNCATION_FACTOR * ha * scale(arc) + NOISE_FACTOR * noise.max(st.rounding_bound(mu, j, scale(arc))),
            );
        }
    }
    for l in 1..q {
        let (left, right, chi) = (&state.gamma_arcs[l - 1], &state.gamma_arcs[l], &state.chi_arcs[l - 1]);
        let r = dist(left.last(), chi.last()).max(dist(chi.last(), right.first()));
        b.push(LineKind::Concurrency, format!("γ_{l}(x_{l}) = χ_{l}(x_{l}) = γ_{}(x_{l})", l + 1), r, exact(scale(left)));
        for mu in 1..=2 * k - 2 {
            let (r, noise) = ctx.residual(state, Condition::Jump { l, mu })?;
            let t = TRUNCATION_FACTOR * ha * (scale(left) + scale(right)) + NOISE_FACTOR * noise;
            b.push(LineKind::Jump, format!("[Δ_{l} D^{}∂γ] = 0", mu - 1), norm(&r), t);
        }
        let (r, noise) = ctx.residual(state, Condition::Balance { l })?;
        let t = TRUNCATION_FACTOR * ha * (scale(left) + scale(right) + scale(chi) / s2) + NOISE_FACTOR * noise;
        b.push(
            LineKind::Balancing,
            format!("(-1)^k[Δ_{l} D^{}∂γ] + σ⁻²∂χ_{l}(x_{l}) = 0", 2 * k - 2),
            norm(&r),
            t,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::EmbeddedManifold;
    use crate::netstate::{ArcGrid, EndpointDerivatives};

    /// Data on the single cubic `c(x) = (x/2, 0.2x³ − 0.5x² + 0.1x)`: the clamped spline
    /// reproduces it, so every junction is smooth.
    fn cubic(x: f64) -> Vec<f64> {
        vec![0.5 * x, 0.2 * x * x * x - 0.5 * x * x + 0.1 * x]
    }

    fn fixture(q: usize, n: usize) -> (InterpolationProblem, NetworkState) {
        let dc = |x: f64| vec![0.5, 0.6 * x * x - x + 0.1];
        let points: Vec<Vec<f64>> = (0..=q).map(|l| cubic(l as f64)).collect();
        let ed = EndpointDerivatives { start: vec![dc(0.0)], end: vec![dc(q as f64)] };
        let p = InterpolationProblem::new(EmbeddedManifold::euclidean(2), points.clone(), ed, 2, 0.0, 0.5).unwrap();
        let gamma = (0..q).map(|l| ArcGrid::from_fn(l + 1, n, cubic)).collect();
        let chi = (1..q).map(|l| ArcGrid::new(l, vec![points[l].clone(); n + 1])).collect();
        (p, NetworkState { gamma_arcs: gamma, chi_arcs: chi, t: 0.0 })
    }

    #[test]
    fn smooth_fixture_passes() {
        let (p, s) = fixture(3, 32);
        let r = compatibility_order_zero(&p, &s);
        assert!(r.all_pass, "{:#?}", r.failures());
        // χ ≡ p_l: the χ lines vanish up to the rounding of the stencil weights
        assert!(r.of_kind(LineKind::ChiStart).all(|l| l.pass && l.residual < 1e-12));
        let count = 2 + 2 + 2 * 2 + (2 + 2) + 2 + 2 * (1 + 2 + 1);
        assert_eq!(r.lines.len(), count);
    }

    #[test]
    fn clamp_mismatch_reported_as_residual() {
        let (mut p, s) = fixture(2, 32);
        p.endpoint_derivatives.start[0][1] += 0.25;
        let r = compatibility_order_zero(&p, &s);
        let clamp = r.of_kind(LineKind::Clamp).next().unwrap();
        assert!(!clamp.pass);
        assert!((clamp.residual - 0.25).abs() < 1e-8, "{}", clamp.residual);
        assert!(r.of_kind(LineKind::Dirichlet).all(|l| l.pass));
    }

    #[test]
    fn dirichlet_and_balancing_violations() {
        let (p, mut s) = fixture(2, 32);
        s.chi_arcs[0].samples[0][0] += 1e-3;
        let r = compatibility_order_zero(&p, &s);
        assert!(r.of_kind(LineKind::Dirichlet).any(|l| !l.pass && l.residual > 9e-4));

        let (p, mut s) = fixture(2, 32);
        // third-derivative kink at x_1 that leaves lower derivatives and the ends untouched
        for (j, pt) in s.gamma_arcs[1].samples.iter_mut().enumerate() {
            let y = j as f64 / 32.0;
            pt[1] += 0.1 * y.powi(3) * (1.0 - y).powi(4);
        }
        let r = compatibility_order_zero(&p, &s);
        let bal = r.of_kind(LineKind::Balancing).next().unwrap();
        assert!(!bal.pass);
        assert!((bal.residual - 0.6).abs() < 1e-2, "{}", bal.residual);
        // lower-order jumps only carry truncation error of the degree-7 bump
        assert!(r.of_kind(LineKind::Jump).all(|l| l.residual < 1e-2 * bal.residual));
    }

    #[test]
    fn wrong_layout_and_higher_order() {
        let (p, mut s) = fixture(2, 16);
        s.chi_arcs.clear();
        let r = compatibility_order_zero(&p, &s);
        assert!(!r.all_pass);
        assert_eq!(r.lines[0].kind, LineKind::Layout);
        assert!(matches!(compatibility(&p, &s, 1), Err(RsfError::UnsupportedOrder(_))));
    }
}
