use serde::{Deserialize, Serialize};

use super::{covariant_chain, node_jet, partial_at, StencilSet};
use crate::manifold::EmbeddedManifold;
use crate::netstate::{ArcGrid, NetworkState};
use crate::vecops::{compensated_sum, dot};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub tension: f64,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    pub k: usize,
    pub lambda: f64,
    pub sigma: f64,
}

/// Trapezoid rule with fourth-order Gregory end corrections on `[0, 1]` (`f.len() − 1`
/// intervals; the plain trapezoid rule below 6 intervals).
pub fn quadrature(f: &[f64]) -> f64 {
    let n = f.len() - 1;
    let h = 1.0 / n as f64;
    const END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let w = |j: usize| -> f64 {
        if n < 6 {
            return if j == 0 || j == n { 0.5 } else { 1.0 };
        }
        match j.min(n - j) {
            e @ 0..=2 => END[e],
            _ => 1.0,
        }
    };
    h * compensated_sum(f.iter().enumerate().map(|(j, v)| w(j) * v))
}

fn bending_density(m: &EmbeddedManifold, st: &StencilSet, arc: &ArcGrid, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut bend = Vec::with_capacity(arc.n() + 1);
    let mut speed = Vec::with_capacity(arc.n() + 1);
    let mut t = vec![0.0; arc.dim()];
    let mut s = vec![0.0; arc.dim()];
    for j in 0..=arc.n() {
        let g = node_jet(st, &arc.samples, j, k);
        let chain = covariant_chain(m, &g, k - 1);
        m.tangent_into(&arc.samples[j], chain[k - 1].get(0), &mut t);
        m.tangent_into(&arc.samples[j], chain[0].get(0), &mut s);
        bend.push(dot(&t, &t));
        speed.push(dot(&s, &s));
    }
    (bend, speed)
}

/// `E = ½Σ∫|D^{k−1}γ_x|² + λ·½Σ∫|γ_x|² + σ⁻²·½Σ∫|χ_x|²` by [`quadrature`].
pub fn energy(m: &EmbeddedManifold, state: &NetworkState, st: &StencilSet, params: &EnergyParams) -> EnergyBreakdown {
    let mut bending = Vec::new();
    let mut tension = Vec::new();
    for arc in &state.gamma_arcs {
        let (b, s) = bending_density(m, st, arc, params.k);
        bending.push(0.5 * quadrature(&b));
        tension.push(0.5 * quadrature(&s));
    }
    let mut penalty = Vec::new();
    let mut t = vec![0.0; m.ambient_dim()];
    for arc in &state.chi_arcs {
        let f: Vec<f64> = (0..=arc.n())
            .map(|j| {
                let d = partial_at(st, &arc.samples, 1, j);
                m.tangent_into(&arc.samples[j], &d, &mut t);
                dot(&t, &t)
            })
            .collect();
        penalty.push(0.5 * quadrature(&f));
    }
    let bending = compensated_sum(bending);
    let tension = params.lambda * compensated_sum(tension);
    let penalty = if state.chi_arcs.is_empty() { 0.0 } else { compensated_sum(penalty) / (params.sigma * params.sigma) };
    EnergyBreakdown { bending, tension, penalty, total: compensated_sum([bending, tension, penalty]) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_segment_tension() {
        let m = EmbeddedManifold::euclidean(2);
        let arc = ArcGrid::from_fn(1, 16, |x| vec![2.0 * x, 0.0]);
        let st = StencilSet::new(16, 4, 4).unwrap();
        let s = NetworkState { gamma_arcs: vec![arc], chi_arcs: vec![], t: 0.0 };
        let e = energy(&m, &s, &st, &EnergyParams { k: 2, lambda: 1.0, sigma: 1.0 });
        assert!(e.bending.abs() < 1e-20);
        assert!((e.tension - 2.0).abs() < 1e-13);
        assert!((e.total - e.bending - e.tension - e.penalty).abs() < 1e-15);
    }

    #[test]
    fn geodesic_chi_penalty() {
        // great-circle arc of length 0.3 on the unit parameter interval: σ⁻²·L²/2 = 4.5 at σ = 0.1
        let m = EmbeddedManifold::sphere(2);
        let g = ArcGrid::from_fn(1, 32, |x| vec![(0.3 * x).cos(), (0.3 * x).sin(), 0.0]);
        let chi = ArcGrid::from_fn(1, 32, |x| vec![(0.3 * x).cos(), 0.0, (0.3 * x).sin()]);
        let st = StencilSet::new(32, 4, 4).unwrap();
        let s = NetworkState { gamma_arcs: vec![g.clone(), g], chi_arcs: vec![chi], t: 0.0 };
        let e = energy(&m, &s, &st, &EnergyParams { k: 2, lambda: 0.0, sigma: 0.1 });
        assert!((e.penalty - 4.5).abs() < 1e-7, "{}", e.penalty);
    }

    #[test]
    fn constant_chi_has_no_penalty() {
        let m = EmbeddedManifold::sphere(2);
        let g = ArcGrid::from_fn(1, 16, |x| vec![x.cos(), x.sin(), 0.0]);
        let chi = ArcGrid::new(1, vec![vec![0.0, 0.0, 1.0]; 17]);
        let st = StencilSet::new(16, 4, 4).unwrap();
        let s = NetworkState { gamma_arcs: vec![g.clone(), g], chi_arcs: vec![chi], t: 0.0 };
        assert_eq!(energy(&m, &s, &st, &EnergyParams { k: 2, lambda: 0.0, sigma: 0.1 }).penalty, 0.0);
    }

    #[test]
    fn quadrature_exact_for_cubics_and_fourth_order() {
        for n in [6, 7, 16] {
            let f: Vec<f64> = (0..=n).map(|j| {
                let x = j as f64 / n as f64;
                4.0 * x * x * x - 3.0 * x * x + 1.0
            }).collect();
            assert!((quadrature(&f) - 1.0).abs() < 1e-14, "n = {n}");
        }
        let err = |n: usize| {
            let f: Vec<f64> = (0..=n).map(|j| (2.0 * j as f64 / n as f64).exp()).collect();
            (quadrature(&f) - (2f64.exp() - 1.0) / 2.0).abs()
        };
        assert!(err(16) / err(32) > 12.0);
        assert_eq!(quadrature(&[1.0, 3.0]), 2.0);
    }
}
