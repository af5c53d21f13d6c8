//! First variation of the energy along a tangent direction field.
//!
//! `δE[w] = Σ_l ∫⟨−𝓛(γ_l), w⟩ + Σ_l ∫⟨−σ⁻² D_x∂_xχ_l, w_χ⟩ + boundary terms`, where at each arc end
//! the boundary contribution is
//! `Σ_{ℓ=1}^{k}(−1)^{ℓ−1}⟨D^{k−ℓ}w, D^{k+ℓ−2}γ_x⟩
//!  + Σ_{μ=2}^{k−1}Σ_{ℓ=1}^{k−μ}(−1)^{ℓ−1}⟨D^{k−μ−ℓ}[R(w,γ_x)D^{μ−2}γ_x], D^{k+ℓ−2}γ_x⟩
//!  + λ⟨w, γ_x⟩`, evaluated as `[·]_{x_{l−1}}^{x_l}`, plus `σ⁻²[⟨w_χ, χ_x⟩]`.

use super::{covariant_chain, energy, euler_lagrange_from_jet, field_chain, node_jet, partial_at, quadrature, EnergyParams, StencilSet};
use crate::error::Result;
use crate::manifold::{AmbientVector, EmbeddedManifold};
use crate::netstate::{ArcGrid, NetworkState};
use crate::vecops::dot;

/// Tangent vectors per node with the layout of a [`NetworkState`].
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub gamma: Vec<Vec<AmbientVector>>,
    pub chi: Vec<Vec<AmbientVector>>,
}

impl Direction {
    pub fn zeros_like(state: &NetworkState) -> Self {
        let z = |a: &ArcGrid| vec![vec![0.0; a.dim()]; a.n() + 1];
        Self { gamma: state.gamma_arcs.iter().map(z).collect(), chi: state.chi_arcs.iter().map(z).collect() }
    }
}

/// `R(p + εw)` node by node.
pub fn perturb(m: &EmbeddedManifold, state: &NetworkState, dir: &Direction, eps: f64) -> Result<NetworkState> {
    let mv = |arcs: &[ArcGrid], w: &[Vec<AmbientVector>]| -> Result<Vec<ArcGrid>> {
        arcs.iter()
            .zip(w)
            .map(|(a, wa)| {
                let samples = a
                    .samples
                    .iter()
                    .zip(wa)
                    .map(|(p, v)| {
                        let moved: Vec<f64> = p.iter().zip(v).map(|(x, y)| x + eps * y).collect();
                        m.project_point(&moved)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ArcGrid::new(a.arc_index, samples))
            })
            .collect()
    };
    Ok(NetworkState { gamma_arcs: mv(&state.gamma_arcs, &dir.gamma)?, chi_arcs: mv(&state.chi_arcs, &dir.chi)?, t: state.t })
}

fn proj(m: &EmbeddedManifold, p: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    m.tangent_into(p, v, &mut out);
    out
}

fn gamma_boundary_term(
    m: &EmbeddedManifold,
    st: &StencilSet,
    arc: &ArcGrid,
    w: &[AmbientVector],
    j: usize,
    k: usize,
    lambda: f64,
) -> f64 {
    let p = &arc.samples[j];
    let g = node_jet(st, &arc.samples, j, 2 * k - 1);
    let gchain = covariant_chain(m, &g, 2 * k - 2);
    let dg = |i: usize| proj(m, p, gchain[i].get(0));
    let wchain = field_chain(m, &g, node_jet(st, w, j, k - 1), k - 1);
    let dw = |i: usize| proj(m, p, wchain[i].get(0));
    let sgn = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    let mut b = 0.0;
    for ell in 1..=k {
        b += sgn(ell - 1) * dot(&dw(k - ell), &dg(k + ell - 2));
    }
    if !m.is_euclidean() {
        for mu in 2..k {
            // Y = R(w, γ_x) D^{μ−2}γ_x sampled along the arc
            let y: Vec<AmbientVector> = (0..=arc.n())
                .map(|i| {
                    let q = &arc.samples[i];
                    let gi = node_jet(st, &arc.samples, i, mu - 1);
                    let ch = covariant_chain(m, &gi, mu - 2);
                    let mut r = vec![0.0; q.len()];
                    m.curvature_into(q, &proj(m, q, &w[i]), &proj(m, q, ch[0].get(0)), &proj(m, q, ch[mu - 2].get(0)), &mut r);
                    r
                })
                .collect();
            let ychain = field_chain(m, &g, node_jet(st, &y, j, k - mu - 1), k - mu - 1);
            for ell in 1..=(k - mu) {
                b += sgn(ell - 1) * dot(&proj(m, p, ychain[k - mu - ell].get(0)), &dg(k + ell - 2));
            }
        }
    }
    b + lambda * dot(&proj(m, p, &w[j]), &dg(0))
}

/// Analytic first variation (interior plus boundary terms).
pub fn first_variation(
    m: &EmbeddedManifold,
    st: &StencilSet,
    state: &NetworkState,
    params: &EnergyParams,
    dir: &Direction,
) -> f64 {
    let k = params.k;
    let mut total = 0.0;
    for (arc, w) in state.gamma_arcs.iter().zip(&dir.gamma) {
        let n = arc.n();
        let f: Vec<f64> = (0..=n)
            .map(|j| {
                let g = node_jet(st, &arc.samples, j, 2 * k);
                -dot(&euler_lagrange_from_jet(m, &g, k, params.lambda), &w[j])
            })
            .collect();
        total += quadrature(&f);
        total += gamma_boundary_term(m, st, arc, w, n, k, params.lambda) - gamma_boundary_term(m, st, arc, w, 0, k, params.lambda);
    }
    let s2 = 1.0 / (params.sigma * params.sigma);
    for (arc, w) in state.chi_arcs.iter().zip(&dir.chi) {
        let n = arc.n();
        let f: Vec<f64> = (0..=n)
            .map(|j| {
                let acc = super::chi_acceleration_at(m, st, arc, j).expect("stencils cover χ");
                -s2 * dot(&acc, &w[j])
            })
            .collect();
        total += quadrature(&f);
        let edge = |j: usize| s2 * dot(&proj(m, &arc.samples[j], &partial_at(st, &arc.samples, 1, j)), &w[j]);
        total += edge(n) - edge(0);
    }
    total
}

/// Relative error between the central difference `(E(⊕εw) − E(⊖εw))/2ε` and [`first_variation`].
pub fn gradient_check(
    m: &EmbeddedManifold,
    st: &StencilSet,
    state: &NetworkState,
    params: &EnergyParams,
    dir: &Direction,
    eps: f64,
) -> Result<f64> {
    let plus = energy(m, &perturb(m, state, dir, eps)?, st, params).total;
    let minus = energy(m, &perturb(m, state, dir, -eps)?, st, params).total;
    let fd = (plus - minus) / (2.0 * eps);
    let an = first_variation(m, st, state, params, dir);
    let scale = fd.abs().max(an.abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((fd - an).abs() / scale)
}
