//! Boundary operators of the reparametrised linear system on `y ∈ [0, 1]`.
//!
//! The unknown is `Γ = (g₁, h₁, g₂, …, h_{q−1}, g_q)`, each block `n` columns. The `g_l` alternate
//! orientation, so every junction sits at `y* = 0` or `y* = 1` and couples `(g_l, h_l, g_{l+1})`
//! through `B₂`; the free end of each `h_l` carries the Dirichlet row `Id`, the outer ends `B₀`.

use num_complex::Complex64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfError};

/// `coef · σ^{sigma_pow} · ∂_y^{d}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub sigma_pow: i32,
    pub d: u32,
}

/// Polynomial in `∂_y` (symbol `iξ`) with coefficients in `ℝ[σ, σ⁻¹]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Entry(pub Vec<Term>);

impl Entry {
    pub fn d(coef: f64, d: u32) -> Self {
        Entry(vec![Term { coef, sigma_pow: 0, d }])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.coef == 0.0)
    }

    pub fn degree(&self) -> Option<u32> {
        self.0.iter().filter(|t| t.coef != 0.0).map(|t| t.d).max()
    }

    /// Symbol at phase `ξ`: `∂_y ↦ iξ`.
    pub fn eval(&self, xi: Complex64, sigma: f64) -> Complex64 {
        let ixi = Complex64::i() * xi;
        self.0.iter().map(|t| t.coef * sigma.powi(t.sigma_pow) * ixi.powu(t.d)).sum()
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .filter(|t| t.coef != 0.0)
            .map(|t| {
                let c = if t.coef == 1.0 {
                    String::new()
                } else if t.coef == -1.0 {
                    "-".into()
                } else {
                    format!("{}·", t.coef)
                };
                let s = if t.sigma_pow == 0 { String::new() } else { format!("σ^{}·", t.sigma_pow) };
                let d = match t.d {
                    0 if c.is_empty() && s.is_empty() => "1".to_string(),
                    0 if c == "-" && s.is_empty() => "1".to_string(),
                    0 => String::new(),
                    1 => "∂".into(),
                    d => format!("∂^{d}"),
                };
                format!("{c}{s}{d}").trim_end_matches('·').to_string()
            })
            .collect();
        parts.join(" + ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Entry>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Entry::default(); rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> &Entry {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Entry) {
        self.entries[i * self.cols + j] = e;
    }

    /// `n×n` identity times the scalar entry `e`, placed at block `(bi, bj)`.
    fn put_scalar_block(&mut self, n: usize, bi: usize, bj: usize, e: &Entry) {
        for c in 0..n {
            self.set(bi * n + c, bj * n + c, e.clone());
        }
    }

    pub fn diag(blocks: &[PolyMatrix]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m.set(r0 + i, c0 + j, b.get(i, j).clone());
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    pub fn eval(&self, xi: Complex64, sigma: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(xi, sigma))
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.iter().filter_map(Entry::degree).max().unwrap_or(0)
    }
}

/// `B₀ = (Id, ∂Id, …, ∂^{k−1}Id)ᵀ`, `kn × n`.
pub fn b0(k: usize, n: usize) -> PolyMatrix {
    let mut m = PolyMatrix::zeros(k * n, n);
    for mu in 0..k {
        m.put_scalar_block(n, mu, 0, &Entry::d(1.0, mu as u32));
    }
    m
}

/// Junction operator on `(g_l, h_l, g_{l+1})`: two concurrency rows, jumps `μ = 1..2k−2` with
/// the orientation sign `(−1)^{μ+1}`, and balancing with `(−1)^{k+1}σ⁻²∂` on `h`.
/// `(2k+1)n × 3n`.
pub fn b2(k: usize, n: usize) -> PolyMatrix {
    let rows = 2 * k + 1;
    let mut m = PolyMatrix::zeros(rows * n, 3 * n);
    m.put_scalar_block(n, 0, 0, &Entry::d(1.0, 0));
    m.put_scalar_block(n, 0, 1, &Entry::d(-1.0, 0));
    m.put_scalar_block(n, 1, 1, &Entry::d(1.0, 0));
    m.put_scalar_block(n, 1, 2, &Entry::d(-1.0, 0));
    for mu in 1..=2 * k - 2 {
        let sign = if mu % 2 == 1 { 1.0 } else { -1.0 };
        m.put_scalar_block(n, mu + 1, 0, &Entry::d(1.0, mu as u32));
        m.put_scalar_block(n, mu + 1, 2, &Entry::d(sign, mu as u32));
    }
    let last = 2 * k;
    let top = (2 * k - 1) as u32;
    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
    m.put_scalar_block(n, last, 0, &Entry::d(1.0, top));
    m.put_scalar_block(n, last, 1, &Entry(vec![Term { coef: s, sigma_pow: -2, d: 1 }]));
    m.put_scalar_block(n, last, 2, &Entry::d(1.0, top));
    m
}

fn identity(n: usize) -> PolyMatrix {
    let mut m = PolyMatrix::zeros(n, n);
    m.put_scalar_block(n, 0, 0, &Entry::d(1.0, 0));
    m
}

/// Placeholder for a right-hand-side entry of `ℬΓ = Φ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiEntry {
    /// Component `c` of `p_l`.
    Point { l: usize, c: usize },
    /// Component `c` of `±b^μ` at the start (`end = false`) or end.
    Clamp { end: bool, mu: usize, c: usize, negate: bool },
    Zero,
}

/// Block kinds along the diagonal of `ℬ(y*)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    /// Outer end of `g_1` (`end = false`) or `g_q`.
    B0 { end: bool },
    /// Dirichlet end of `h_l`.
    Id { l: usize },
    /// Junction `x_l` on `(g_l, h_l, g_{l+1})`.
    B2 { l: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOperator {
    pub y_star: u8,
    pub blocks: Vec<Block>,
    pub matrix: PolyMatrix,
    pub phi: Vec<PhiEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOperatorMatrix {
    pub k: usize,
    pub n: usize,
    pub q: usize,
    pub b0: PolyMatrix,
    pub b2: PolyMatrix,
    pub at_zero: BoundaryOperator,
    pub at_one: BoundaryOperator,
}

/// `g_l(y)` runs forward for odd `l` and backward for even `l`, so `x_l` lies at `y* = 1` for
/// odd `l` and at `y* = 0` for even `l`.
fn blocks_at(q: usize, y_star: u8) -> Vec<Block> {
    let junction_side = |l: usize| if l % 2 == 1 { 1 } else { 0 };
    let mut out = Vec::new();
    // walk the column blocks g_1, h_1, g_2, …, g_q
    let mut l = 1;
    let mut at_g = true;
    while l <= q {
        if at_g {
            if l < q && junction_side(l) == y_star {
                // B₂ takes (g_l, h_l, g_{l+1}); continue with h_{l+1}
                out.push(Block::B2 { l });
                l += 1;
                at_g = false;
                if l == q {
                    break;
                }
                continue;
            }
            out.push(Block::B0 { end: l == q });
            at_g = false;
            if l == q {
                break;
            }
        } else {
            // h_l reaches its junction x_l at the other side
            out.push(Block::Id { l });
            l += 1;
            at_g = true;
        }
    }
    out
}

fn operator(k: usize, n: usize, q: usize, y_star: u8) -> BoundaryOperator {
    let blocks = blocks_at(q, y_star);
    let mats: Vec<PolyMatrix> = blocks
        .iter()
        .map(|b| match b {
            Block::B0 { .. } => b0(k, n),
            Block::Id { .. } => identity(n),
            Block::B2 { .. } => b2(k, n),
        })
        .collect();
    let mut phi = Vec::new();
    for b in &blocks {
        match *b {
            Block::B0 { end } => {
                let l = if end { q } else { 0 };
                phi.extend((0..n).map(|c| PhiEntry::Point { l, c }));
                // g_q runs backward when q is even: odd derivatives change sign
                let reversed = end && q % 2 == 0;
                for mu in 1..k {
                    phi.extend((0..n).map(|c| PhiEntry::Clamp { end, mu, c, negate: reversed && mu % 2 == 1 }));
                }
            }
            Block::Id { l } => phi.extend((0..n).map(|c| PhiEntry::Point { l, c })),
            Block::B2 { .. } => phi.extend(std::iter::repeat(PhiEntry::Zero).take((2 * k + 1) * n)),
        }
    }
    BoundaryOperator { y_star, blocks, matrix: PolyMatrix::diag(&mats), phi }
}

pub fn assemble_boundary_matrices(k: usize, n: usize, q: usize) -> Result<BoundaryOperatorMatrix> {
    if k < 2 {
        return Err(RsfError::InvalidArity(format!("k = {k}: the boundary system needs k ≥ 2")));
    }
    if n < 1 {
        return Err(RsfError::InvalidArity("n must be ≥ 1".into()));
    }
    if q < 2 {
        return Err(RsfError::InvalidArity(format!("q = {q}: junction operators need q ≥ 2")));
    }
    Ok(BoundaryOperatorMatrix {
        k,
        n,
        q,
        b0: b0(k, n),
        b2: b2(k, n),
        at_zero: operator(k, n, q, 0),
        at_one: operator(k, n, q, 1),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeCheck {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Required by the count of boundary conditions.
    pub expected_rows: usize,
    pub expected_cols: usize,
    /// Dimensions as printed in the source (`kn × n`, `2nk × 3n`, `2nkq × 2nq`).
    pub stated: String,
    pub stated_rows: usize,
    pub stated_cols: usize,
    pub ok: bool,
}

impl BoundaryOperatorMatrix {
    /// Shapes against the condition count: `k` conditions per component of every `g`-end,
    /// one per component of every `h`-end, over `(2q−1)n` unknowns.
    pub fn shape_checks(&self) -> Vec<ShapeCheck> {
        let (k, n, q) = (self.k, self.n, self.q);
        let per_point = (q * k + q - 1) * n;
        let mut out = vec![
            ShapeCheck {
                name: "B0".into(),
                rows: self.b0.rows,
                cols: self.b0.cols,
                expected_rows: k * n,
                expected_cols: n,
                stated: "kn × n".into(),
                stated_rows: k * n,
                stated_cols: n,
                ok: false,
            },
            ShapeCheck {
                name: "B2".into(),
                rows: self.b2.rows,
                cols: self.b2.cols,
                expected_rows: (2 * k + 1) * n,
                expected_cols: 3 * n,
                stated: "2nk × 3n".into(),
                stated_rows: 2 * n * k,
                stated_cols: 3 * n,
                ok: false,
            },
        ];
        for op in [&self.at_zero, &self.at_one] {
            out.push(ShapeCheck {
                name: format!("B(y*={})", op.y_star),
                rows: op.matrix.rows,
                cols: op.matrix.cols,
                expected_rows: per_point,
                expected_cols: (2 * q - 1) * n,
                stated: "2nkq × 2nq".into(),
                stated_rows: 2 * n * k * q,
                stated_cols: 2 * n * q,
                ok: false,
            });
        }
        for s in out.iter_mut() {
            s.ok = s.rows == s.expected_rows && s.cols == s.expected_cols;
        }
        let phi_ok = [&self.at_zero, &self.at_one].iter().all(|op| op.phi.len() == op.matrix.rows);
        if !phi_ok {
            for s in out.iter_mut().skip(2) {
                s.ok = false;
            }
        }
        out
    }
}
