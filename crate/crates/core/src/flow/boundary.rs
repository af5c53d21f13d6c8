//! Local Newton corrections that restore the boundary conditions after pointwise retraction.
//!
//! Each cluster owns the non-Dirichlet algebraic nodes at one end or junction, parametrised
//! in tangent coordinates `x(c) = P_M(x⁰ + E c)`. Its residuals are the intrinsic conditions
//! (covariant clamps, covariant jumps `μ = 1..2k−2`, balancing) expressed in an orthonormal
//! tangent basis at the anchor point, so the system is square: `m` equations per condition and
//! `m` unknowns per node group.

use nalgebra::{DMatrix, DVector};

use super::layout::NodeRef;
use crate::calculus::{covariant_derivative_at, partial_at, StencilSet};
use crate::error::{Result, RsfError};
use crate::manifold::{AmbientVector, EmbeddedManifold};
use crate::netstate::{junction_jump, InterpolationProblem, NetworkState};
use crate::vecops::{dot, norm_inf};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Condition {
    /// `D^{μ−1}∂γ = v^μ` at the start (`end = false`) or the end.
    Clamp { end: bool, mu: usize },
    /// Covariant jump of order `μ` at junction `l` (1-based).
    Jump { l: usize, mu: usize },
    /// `(−1)^k[Δ D^{2k−2}∂γ] + σ⁻² ∂χ_l(x_l)` at junction `l`.
    Balance { l: usize },
}

#[derive(Clone, Debug)]
pub struct Cluster {
    /// Nodes sharing one value are grouped (the fitting-mode junction point).
    pub groups: Vec<Vec<NodeRef>>,
    pub conditions: Vec<Condition>,
    pub anchor: NodeRef,
}

fn node(state: &NetworkState, r: NodeRef) -> &AmbientVector {
    match r {
        NodeRef::Gamma(l, j) => &state.gamma_arcs[l].samples[j],
        NodeRef::Chi(l, j) => &state.chi_arcs[l].samples[j],
    }
}

fn node_mut(state: &mut NetworkState, r: NodeRef) -> &mut AmbientVector {
    match r {
        NodeRef::Gamma(l, j) => &mut state.gamma_arcs[l].samples[j],
        NodeRef::Chi(l, j) => &mut state.chi_arcs[l].samples[j],
    }
}

/// Clusters for a network with `q` arcs of `N` intervals.
pub fn clusters(q: usize, n: usize, k: usize, fitting: bool) -> Vec<Cluster> {
    let fitting = fitting && q > 1;
    let mut out = Vec::new();
    for end in [false, true] {
        let l = if end { q - 1 } else { 0 };
        let at = |i: usize| NodeRef::Gamma(l, if end { n - i } else { i });
        out.push(Cluster {
            groups: (1..k).map(|i| vec![at(i)]).collect(),
            conditions: (1..k).map(|mu| Condition::Clamp { end, mu }).collect(),
            anchor: at(0),
        });
    }
    for l in 1..q {
        let mut groups: Vec<Vec<NodeRef>> = Vec::new();
        for i in 1..k {
            groups.push(vec![NodeRef::Gamma(l - 1, n - i)]);
            groups.push(vec![NodeRef::Gamma(l, i)]);
        }
        let mut conditions: Vec<Condition> = (1..=2 * k - 2).map(|mu| Condition::Jump { l, mu }).collect();
        if fitting {
            groups.push(vec![NodeRef::Gamma(l - 1, n), NodeRef::Gamma(l, 0), NodeRef::Chi(l - 1, n)]);
            conditions.push(Condition::Balance { l });
        }
        out.push(Cluster { groups, conditions, anchor: NodeRef::Gamma(l, 0) });
    }
    out
}

/// Evaluation context shared by all clusters.
pub struct Context<'a> {
    pub m: &'a EmbeddedManifold,
    pub st: &'a StencilSet,
    pub problem: &'a InterpolationProblem,
    pub k: usize,
    pub sigma: f64,
}

impl Context<'_> {
    /// Ambient residual of a condition and a bound on its rounding noise.
    pub fn residual(&self, state: &NetworkState, c: Condition) -> Result<(AmbientVector, f64)> {
        let (m, st, k) = (self.m, self.st, self.k);
        let scale = |a: &crate::netstate::ArcGrid| a.samples.iter().map(|p| norm_inf(p)).fold(1.0, f64::max);
        match c {
            Condition::Clamp { end, mu } => {
                let arc = if end { state.gamma_arcs.last().unwrap() } else { &state.gamma_arcs[0] };
                let j = if end { arc.n() } else { 0 };
                let v = if end { &self.problem.endpoint_derivatives.end } else { &self.problem.endpoint_derivatives.start };
                let d = covariant_derivative_at(m, st, arc, j, mu - 1)?;
                let noise = st.rounding_bound(mu, j, scale(arc));
                Ok((d.iter().zip(&v[mu - 1]).map(|(a, b)| a - b).collect(), noise))
            }
            Condition::Jump { l, mu } => {
                let (a, b) = (&state.gamma_arcs[l - 1], &state.gamma_arcs[l]);
                let noise = st.rounding_bound(mu, a.n(), scale(a)) + st.rounding_bound(mu, 0, scale(b));
                Ok((junction_jump(m, state, st, l, mu)?, noise))
            }
            Condition::Balance { l } => {
                let (a, b) = (&state.gamma_arcs[l - 1], &state.gamma_arcs[l]);
                let chi = &state.chi_arcs[l - 1];
                let jump = junction_jump(m, state, st, l, 2 * k - 1)?;
                let s2 = 1.0 / (self.sigma * self.sigma);
                let mut dchi = vec![0.0; chi.dim()];
                m.tangent_into(chi.last(), &partial_at(st, &chi.samples, 1, chi.n()), &mut dchi);
                let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
                let r = jump.iter().zip(&dchi).map(|(j, x)| sgn * j + s2 * x).collect();
                let noise = st.rounding_bound(2 * k - 1, a.n(), scale(a))
                    + st.rounding_bound(2 * k - 1, 0, scale(b))
                    + s2 * st.rounding_bound(1, chi.n(), scale(chi));
                Ok((r, noise))
            }
        }
    }

    /// Newton solve of one cluster in place.
    pub fn solve(&self, state: &mut NetworkState, cl: &Cluster) -> Result<()> {
        const MAX_ITER: usize = 30;
        const NOISE_FACTOR: f64 = 64.0;
        let m = self.m;
        let dm = m.intrinsic_dim();
        let base: Vec<AmbientVector> = cl.groups.iter().map(|g| node(state, g[0]).clone()).collect();
        let frames: Vec<Vec<AmbientVector>> = base.iter().map(|p| m.tangent_basis(p)).collect();
        let anchor = m.tangent_basis(node(state, cl.anchor));
        let nu = cl.groups.len() * dm;
        let nr = cl.conditions.len() * dm;
        debug_assert_eq!(nu, nr);
        let place = |state: &mut NetworkState, c: &[f64]| -> Result<()> {
            for (g, group) in cl.groups.iter().enumerate() {
                let mut x = base[g].clone();
                for (i, e) in frames[g].iter().enumerate() {
                    for (xc, ec) in x.iter_mut().zip(e) {
                        *xc += c[g * dm + i] * ec;
                    }
                }
                let x = m.project_point(&x)?;
                for r in group {
                    node_mut(state, *r).clone_from(&x);
                }
            }
            Ok(())
        };
        let eval = |state: &NetworkState| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut r = Vec::with_capacity(nr);
            let mut tol = Vec::with_capacity(nr);
            for c in &cl.conditions {
                let (v, noise) = self.residual(state, *c)?;
                for e in &anchor {
                    r.push(dot(&v, e));
                    tol.push(NOISE_FACTOR * noise);
                }
            }
            Ok((r, tol))
        };
        let mut c = vec![0.0; nu];
        let mut last = f64::INFINITY;
        for _ in 0..MAX_ITER {
            place(state, &c)?;
            let (r, tol) = eval(state)?;
            if r.iter().zip(&tol).all(|(a, t)| a.abs() <= *t) {
                return Ok(());
            }
            let size = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            last = size;
            let mut jac = DMatrix::<f64>::zeros(nr, nu);
            for col in 0..nu {
                let delta = 1e-7;
                let mut cp = c.clone();
                cp[col] += delta;
                place(state, &cp)?;
                let (rp, _) = eval(state)?;
                for row in 0..nr {
                    jac[(row, col)] = (rp[row] - r[row]) / delta;
                }
            }
            let step = jac
                .lu()
                .solve(&DVector::from_iterator(nr, r.iter().map(|x| -x)))
                .ok_or_else(|| RsfError::RetractionFailure("singular boundary Jacobian".into()))?;
            for (ci, s) in c.iter_mut().zip(step.iter()) {
                *ci += s;
            }
        }
        place(state, &c)?;
        Err(RsfError::RetractionFailure(format!(
            "boundary Newton did not reach the noise floor in {MAX_ITER} iterations (residual {last:.3e})"
        )))
    }
}
