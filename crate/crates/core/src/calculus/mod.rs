//! Discrete differential operators along arcs: partial derivatives from stencils, covariant
//! derivatives `D^i ∂γ`, the Euler–Lagrange operator
//!
//! `𝓛(γ) = (−1)^{k+1} D^{2k−1}γ_x + Σ_{μ=2}^{k} (−1)^{μ+k+1} R(D^{2k−μ−1}γ_x, D^{μ−2}γ_x)γ_x + λ Dγ_x`,
//!
//! its extrinsic counterpart, energies and the first-variation check.

mod energy;
mod jet;
mod stencil;
mod variation;

pub use energy::{energy, quadrature, EnergyBreakdown, EnergyParams};
pub use jet::{covariant_chain, field_chain, sff_jet, Jet};
pub use stencil::{fornberg_weights, stencil_offsets, Stencil, StencilSet};
pub use variation::{first_variation, gradient_check, perturb, Direction};

use crate::error::{Result, RsfError};
use crate::manifold::{AmbientVector, EmbeddedManifold};
use crate::netstate::ArcGrid;
use crate::vecops::dot2;

/// Stencil accuracy order used throughout.
pub const DEFAULT_ORDER: usize = 4;

/// `∂^d f` at node `j` of sampled data (compensated dot products).
pub fn partial_at(st: &StencilSet, samples: &[AmbientVector], d: usize, j: usize) -> AmbientVector {
    let s = st.stencil(d, j);
    let n = samples[0].len();
    let mut col = vec![0.0; s.weights.len()];
    (0..n)
        .map(|c| {
            for (i, v) in col.iter_mut().enumerate() {
                *v = samples[s.start + i][c];
            }
            dot2(&s.weights, &col)
        })
        .collect()
}

/// Jet `(f, ∂f, …, ∂^order f)` at node `j`.
pub fn node_jet(st: &StencilSet, samples: &[AmbientVector], j: usize, order: usize) -> Jet {
    let derivs: Vec<AmbientVector> = (0..=order).map(|d| partial_at(st, samples, d, j)).collect();
    Jet::from_derivatives(&derivs)
}

fn check_grid(st: &StencilSet, arc: &ArcGrid, need: usize) -> Result<()> {
    if arc.n() != st.n() {
        return Err(RsfError::GridTooCoarse(format!("arc has N = {}, stencils built for {}", arc.n(), st.n())));
    }
    if st.max_derivative() < need {
        return Err(RsfError::GridTooCoarse(format!(
            "derivative order {need} requested, stencils built to {}",
            st.max_derivative()
        )));
    }
    Ok(())
}

fn project(m: &EmbeddedManifold, p: &[f64], v: &[f64]) -> AmbientVector {
    let mut out = vec![0.0; v.len()];
    m.tangent_into(p, v, &mut out);
    out
}

/// Tangent-projected `D^i ∂γ` at node `j`.
pub fn covariant_derivative_at(
    m: &EmbeddedManifold,
    st: &StencilSet,
    arc: &ArcGrid,
    j: usize,
    i: usize,
) -> Result<AmbientVector> {
    check_grid(st, arc, i + 1)?;
    let g = node_jet(st, &arc.samples, j, i + 1);
    let chain = covariant_chain(m, &g, i);
    Ok(project(m, &arc.samples[j], chain[i].get(0)))
}

/// Samples of `D^i ∂γ` (tangent-projected) at every node.
pub fn covariant_derivative(m: &EmbeddedManifold, arc: &ArcGrid, st: &StencilSet, i: usize) -> Result<Vec<AmbientVector>> {
    (0..=arc.n()).map(|j| covariant_derivative_at(m, st, arc, j, i)).collect()
}

/// Samples of `W_i = D^i ∂γ − ∂^{i+1}γ` (`W_0 ≡ 0`).
pub fn w_correction(m: &EmbeddedManifold, arc: &ArcGrid, st: &StencilSet, i: usize) -> Result<Vec<AmbientVector>> {
    check_grid(st, arc, i + 1)?;
    let n = arc.dim();
    (0..=arc.n())
        .map(|j| {
            if i == 0 {
                return Ok(vec![0.0; n]);
            }
            let g = node_jet(st, &arc.samples, j, i + 1);
            let chain = covariant_chain(m, &g, i);
            Ok(chain[i].get(0).iter().zip(g.get(i + 1)).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// `𝓛(γ)` at a node from the jet `g` of order ≥ 2k, tangent-projected at `g.get(0)`.
pub fn euler_lagrange_from_jet(m: &EmbeddedManifold, g: &Jet, k: usize, lambda: f64) -> AmbientVector {
    let chain = covariant_chain(m, g, 2 * k - 1);
    euler_lagrange_from_chain(m, g.get(0), &chain, k, lambda)
}

/// `𝓛` assembled from a covariant chain `D^i ∂γ`, `i = 0..=2k−1`.
pub fn euler_lagrange_from_chain(m: &EmbeddedManifold, p: &[f64], chain: &[Jet], k: usize, lambda: f64) -> AmbientVector {
    let n = p.len();
    let v: Vec<AmbientVector> = chain.iter().map(|c| project(m, p, c.get(0))).collect();
    let sgn = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    let mut out: AmbientVector = v[2 * k - 1].iter().map(|x| sgn(k + 1) * x).collect();
    if !m.is_euclidean() {
        let mut r = vec![0.0; n];
        for mu in 2..=k {
            m.curvature_into(p, &v[2 * k - mu - 1], &v[mu - 2], &v[0], &mut r);
            let s = sgn(mu + k + 1);
            for c in 0..n {
                out[c] += s * r[c];
            }
        }
    }
    if lambda != 0.0 {
        for c in 0..n {
            out[c] += lambda * v[1][c];
        }
    }
    project(m, p, &out)
}

pub fn euler_lagrange_at(
    m: &EmbeddedManifold,
    st: &StencilSet,
    arc: &ArcGrid,
    j: usize,
    k: usize,
    lambda: f64,
) -> Result<AmbientVector> {
    check_grid(st, arc, 2 * k)?;
    let g = node_jet(st, &arc.samples, j, 2 * k);
    Ok(euler_lagrange_from_jet(m, &g, k, lambda))
}

/// Samples of `𝓛(γ_l)` at every node (one-sided stencils at the ends).
pub fn euler_lagrange(m: &EmbeddedManifold, arc: &ArcGrid, st: &StencilSet, k: usize, lambda: f64) -> Result<Vec<AmbientVector>> {
    if k < 2 {
        return Err(RsfError::InvalidArity(format!("k must be ≥ 2, got {k}")));
    }
    (0..=arc.n()).map(|j| euler_lagrange_at(m, st, arc, j, k, lambda)).collect()
}

/// `D_x ∂_x χ` at node `j` (tangent-projected).
pub fn chi_acceleration_at(m: &EmbeddedManifold, st: &StencilSet, arc: &ArcGrid, j: usize) -> Result<AmbientVector> {
    covariant_derivative_at(m, st, arc, j, 1)
}

/// Extrinsic right-hand side `(−1)^{k+1}∂^{2k}γ + F_l`, with the `W_i` built by the nested
/// recursion `W_{i+1} = ∂W_i − Π(∂^{i+1}γ + W_i, ∂γ)` where `∂W_i` is a stencil derivative of the
/// sampled field (an assembly path independent of the jet arithmetic used by [`euler_lagrange`]).
pub fn extrinsic_rhs_gamma(m: &EmbeddedManifold, arc: &ArcGrid, st: &StencilSet, k: usize, lambda: f64) -> Result<Vec<AmbientVector>> {
    check_grid(st, arc, 2 * k)?;
    let nn = arc.n() + 1;
    let n = arc.dim();
    let partials: Vec<Vec<AmbientVector>> =
        (0..=2 * k).map(|d| (0..nn).map(|j| partial_at(st, &arc.samples, d, j)).collect()).collect();
    let mut w: Vec<Vec<AmbientVector>> = vec![vec![vec![0.0; n]; nn]];
    for i in 0..(2 * k - 1) {
        let wi = &w[i];
        let dwi: Vec<AmbientVector> = (0..nn).map(|j| partial_at(st, wi, 1, j)).collect();
        let next: Vec<AmbientVector> = (0..nn)
            .map(|j| {
                let arg: Vec<f64> = partials[i + 1][j].iter().zip(&wi[j]).map(|(a, b)| a + b).collect();
                let mut out = dwi[j].clone();
                m.sff_accumulate(&arc.samples[j], &arg, &partials[1][j], -1.0, &mut out);
                out
            })
            .collect();
        w.push(next);
    }
    let sgn = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    Ok((0..nn)
        .map(|j| {
            let p = &arc.samples[j];
            let mut out: AmbientVector =
                (0..n).map(|c| sgn(k + 1) * (partials[2 * k][j][c] + w[2 * k - 1][j][c])).collect();
            for c in 0..n {
                out[c] += lambda * (partials[2][j][c] + w[1][j][c]);
            }
            if !m.is_euclidean() {
                let mut r = vec![0.0; n];
                for mu in 2..=k {
                    let a: Vec<f64> = (0..n).map(|c| partials[2 * k - mu][j][c] + w[2 * k - mu - 1][j][c]).collect();
                    let b: Vec<f64> = (0..n).map(|c| partials[mu - 1][j][c] + w[mu - 2][j][c]).collect();
                    m.curvature_into(p, &project(m, p, &a), &project(m, p, &b), &project(m, p, &partials[1][j]), &mut r);
                    for c in 0..n {
                        out[c] += sgn(mu + k + 1) * r[c];
                    }
                }
            }
            out
        })
        .collect())
}

/// Extrinsic χ right-hand side `σ²(∂²χ + W₁(∂χ, χ))` with `W₁ = −Π(∂χ, ∂χ)`.
pub fn extrinsic_rhs_chi(m: &EmbeddedManifold, arc: &ArcGrid, st: &StencilSet, sigma: f64) -> Result<Vec<AmbientVector>> {
    check_grid(st, arc, 2)?;
    Ok((0..=arc.n())
        .map(|j| {
            let d1 = partial_at(st, &arc.samples, 1, j);
            let mut out = partial_at(st, &arc.samples, 2, j);
            m.sff_accumulate(&arc.samples[j], &d1, &d1, -1.0, &mut out);
            out.iter().map(|x| sigma * sigma * x).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::{norm, norm_inf};

    fn arc_from(n: usize, f: impl Fn(f64) -> Vec<f64>) -> ArcGrid {
        ArcGrid::from_fn(1, n, f)
    }

    #[test]
    fn flat_cubic_acceleration() {
        let m = EmbeddedManifold::euclidean(2);
        let arc = arc_from(16, |x| vec![x * x * x, 0.0]);
        let st = StencilSet::new(16, 4, 4).unwrap();
        let d2 = covariant_derivative(&m, &arc, &st, 2).unwrap();
        for v in &d2 {
            assert!((v[0] - 6.0).abs() < 1e-9 && v[1].abs() < 1e-12);
        }
        for i in 0..3 {
            assert!(w_correction(&m, &arc, &st, i).unwrap().iter().all(|w| norm_inf(w) == 0.0));
        }
        let el = euler_lagrange(&m, &arc, &st, 2, 0.0).unwrap();
        assert!(el.iter().all(|v| norm_inf(v) < 1e-7));
    }

    #[test]
    fn flat_quintic_is_stationary_for_k3() {
        let m = EmbeddedManifold::euclidean(1);
        let arc = arc_from(24, |x| vec![x.powi(5) - 2.0 * x * x]);
        let st = StencilSet::new(24, 6, 4).unwrap();
        let el = euler_lagrange(&m, &arc, &st, 3, 0.0).unwrap();
        assert!(el.iter().all(|v| v[0].abs() < 1e-3), "{:?}", el);
    }

    fn latitude(theta: f64) -> impl Fn(f64) -> Vec<f64> {
        move |x: f64| vec![theta.sin() * x.cos(), theta.sin() * x.sin(), theta.cos()]
    }

    #[test]
    fn sphere_geodesic_and_latitude() {
        let m = EmbeddedManifold::sphere(2);
        let st = StencilSet::new(32, 4, 4).unwrap();
        let great = arc_from(32, |x| vec![x.cos(), x.sin(), 0.0]);
        for v in covariant_derivative(&m, &great, &st, 1).unwrap() {
            assert!(norm(&v) < 1e-6);
        }
        for w in w_correction(&m, &great, &st, 1).unwrap().iter().zip(&great.samples) {
            assert!(crate::vecops::dist(w.0, w.1) < 1e-6);
        }
        for v in euler_lagrange(&m, &great, &st, 2, 0.0).unwrap() {
            assert!(norm(&v) < 1e-4);
        }
        let lat = arc_from(32, latitude(std::f64::consts::FRAC_PI_4));
        for v in covariant_derivative(&m, &lat, &st, 1).unwrap() {
            // geodesic curvature sinθ·cosθ; one-sided end stencils carry O(h⁴) error
            assert!((norm(&v) - 0.5).abs() < 1e-5, "{}", norm(&v));
        }
    }

    #[test]
    fn extrinsic_matches_intrinsic_on_sphere() {
        let m = EmbeddedManifold::sphere(2);
        let f = |x: f64| {
            let v = vec![1.0 + 0.3 * (2.0 * x).sin(), 0.5 * x - 0.2 * x * x, 0.4 + 0.3 * (3.0 * x).cos()];
            let r = norm(&v);
            v.iter().map(|c| c / r).collect::<Vec<_>>()
        };
        let mut errs = Vec::new();
        for n in [32, 64] {
            let st = StencilSet::new(n, 4, 4).unwrap();
            let arc = arc_from(n, f);
            let a = euler_lagrange(&m, &arc, &st, 2, 0.7).unwrap();
            let b = extrinsic_rhs_gamma(&m, &arc, &st, 2, 0.7).unwrap();
            let mut e: f64 = 0.0;
            for j in 0..=n {
                let tb = project(&m, &arc.samples[j], &b[j]);
                e = e.max(crate::vecops::dist(&a[j], &tb));
            }
            errs.push(e);
        }
        assert!(errs[0] < 5e-2 && errs[1] < errs[0] / 4.0, "{errs:?}");
    }

    #[test]
    fn extrinsic_flat_is_plain_derivative() {
        let m = EmbeddedManifold::euclidean(1);
        let arc = arc_from(20, |x| vec![(2.0 * x).sin()]);
        let st = StencilSet::new(20, 4, 4).unwrap();
        let b = extrinsic_rhs_gamma(&m, &arc, &st, 2, 1.5).unwrap();
        for j in 0..=20 {
            let expect = -partial_at(&st, &arc.samples, 4, j)[0] + 1.5 * partial_at(&st, &arc.samples, 2, j)[0];
            assert!((b[j][0] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn chi_rhs_vanishes_on_great_circle() {
        let m = EmbeddedManifold::sphere(2);
        let arc = arc_from(32, |x| vec![(0.4 * x).cos(), (0.4 * x).sin(), 0.0]);
        let st = StencilSet::new(32, 2, 4).unwrap();
        for v in extrinsic_rhs_chi(&m, &arc, &st, 0.3).unwrap() {
            assert!(norm(&v) < 1e-9);
        }
    }

    #[test]
    fn operators_converge_at_stencil_order() {
        let m = EmbeddedManifold::sphere(2);
        let f = |x: f64| {
            let v = vec![(1.3 * x).cos(), (1.3 * x).sin() * 0.8, 0.6 + 0.2 * x];
            let r = norm(&v);
            v.iter().map(|c| c / r).collect::<Vec<_>>()
        };
        // reference on a fine grid at the shared node x = 0.5
        let eval = |n: usize| {
            let st = StencilSet::new(n, 4, 4).unwrap();
            let arc = arc_from(n, f);
            euler_lagrange_at(&m, &st, &arc, n / 2, 2, 0.0).unwrap()
        };
        let r = eval(256);
        let e1 = crate::vecops::dist(&eval(16), &r);
        let e2 = crate::vecops::dist(&eval(32), &r);
        let order = (e1 / e2).log2();
        assert!(order > 4.0 - 0.3, "observed order {order}");
    }
}
