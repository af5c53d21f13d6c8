//! Finite-difference stencils on the uniform grid `x_j = j/N`, `j = 0..N`.
//!
//! Derivative `d` uses the centred stencil of half-width `r = (2⌊(d+1)/2⌋ − 1 + a)/2`
//! where it fits and a one-sided (shifted) stencil of width `d + a` otherwise, so every
//! stencil has accuracy order at least `a`.

use crate::error::{Result, RsfError};

#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    /// First node index covered.
    pub start: usize,
    /// Weights, already scaled by `h^{−d}`.
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn end(&self) -> usize {
        self.start + self.weights.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StencilSet {
    order: usize,
    n: usize,
    /// `tables[d][j]`, d = 0..=max_derivative.
    tables: Vec<Vec<Stencil>>,
    /// Unscaled weights (grid step 1), same layout.
    unit: Vec<Vec<Vec<f64>>>,
}

/// Fornberg's recursion: weights `c[d][i]` approximating `f^{(d)}(x0)` from nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_d: usize) -> Vec<Vec<f64>> {
    let np = xs.len();
    let mut c = vec![vec![0.0; np]; max_d + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..np {
        let mn = i.min(max_d);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for d in (1..=mn).rev() {
                    c[d][i] = c1 * (d as f64 * c[d - 1][i - 1] - c5 * c[d][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for d in (1..=mn).rev() {
                c[d][j] = (c4 * c[d][j] - d as f64 * c[d - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Node offsets (relative to `j`) for derivative `d` at node `j`.
pub fn stencil_offsets(j: usize, n: usize, d: usize, order: usize) -> Vec<i64> {
    let (j, n) = (j as i64, n as i64);
    let r = ((2 * ((d as i64 + 1) / 2) - 1 + order as i64) / 2).max(0);
    if j - r >= 0 && j + r <= n {
        return (-r..=r).collect();
    }
    let w = (d + order) as i64;
    let s = if j - r < 0 { -j } else { n - j - (w - 1) };
    (s..s + w).collect()
}

impl StencilSet {
    pub fn new(n: usize, max_derivative: usize, order: usize) -> Result<Self> {
        if order < 1 {
            return Err(RsfError::InvalidConfig("stencil order must be ≥ 1".into()));
        }
        let widest = max_derivative + order;
        if n + 1 < widest {
            return Err(RsfError::GridTooCoarse(format!(
                "N = {n} cannot hold a {widest}-point stencil for derivative {max_derivative}"
            )));
        }
        let h = 1.0 / n as f64;
        let mut tables = Vec::with_capacity(max_derivative + 1);
        let mut unit = Vec::with_capacity(max_derivative + 1);
        for d in 0..=max_derivative {
            let mut row = Vec::with_capacity(n + 1);
            let mut urow = Vec::with_capacity(n + 1);
            for j in 0..=n {
                if d == 0 {
                    row.push(Stencil { start: j, weights: vec![1.0] });
                    urow.push(vec![1.0]);
                    continue;
                }
                let offs = stencil_offsets(j, n, d, order);
                let xs: Vec<f64> = offs.iter().map(|&o| o as f64).collect();
                let w = fornberg_weights(0.0, &xs, d).swap_remove(d);
                let s = h.powi(-(d as i32));
                row.push(Stencil { start: (j as i64 + offs[0]) as usize, weights: w.iter().map(|x| x * s).collect() });
                urow.push(w);
            }
            tables.push(row);
            unit.push(urow);
        }
        Ok(Self { order, n, tables, unit })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_derivative(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn stencil(&self, d: usize, j: usize) -> &Stencil {
        &self.tables[d][j]
    }

    /// Weights for grid step 1.
    pub fn unit_weights(&self, d: usize, j: usize) -> &[f64] {
        &self.unit[d][j]
    }

    /// Largest half-extent of any stencil of derivative ≤ `d`, measured from its node.
    pub fn reach(&self, d: usize) -> usize {
        let mut r = 0;
        for dd in 0..=d {
            for (j, s) in self.tables[dd].iter().enumerate() {
                r = r.max(j.abs_diff(s.start)).max(j.abs_diff(s.end() - 1));
            }
        }
        r
    }

    /// `Σ w|u|` bound of the rounding error in `∂^d` applied to data of size `scale` at node `j`.
    pub fn rounding_bound(&self, d: usize, j: usize, scale: f64) -> f64 {
        let s = self.stencil(d, j);
        s.weights.iter().map(|w| w.abs()).sum::<f64>() * scale * f64::EPSILON
    }
}
