//! Unknown ordering and the linear system shared by all ambient coordinates.
//!
//! Nodes are interleaved per arc pair, `γ_l(j), χ_l(j)`, so every boundary row couples
//! indices that are a few stencil widths apart and the matrix stays banded. Boundary rows
//! replace the evolution rows of the *algebraic* nodes: at each end the Dirichlet node plus
//! its `k−1` neighbours, at each junction `k` nodes on each side (plus `χ_l(0)`, `χ_l(N)` in
//! fitting mode). Each row is scaled by `h^{d_max}` so all entries are O(1).

use super::banded::SparseRows;
use crate::calculus::StencilSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    /// 0-based arc, node.
    Gamma(usize, usize),
    Chi(usize, usize),
}

/// Right-hand side of a boundary row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BcRhs {
    /// Data point `p_i`.
    Point(usize),
    /// Extrinsic clamp `b^μ` at the start (`end = false`) or end.
    Clamp { end: bool, mu: usize },
    Zero,
}

#[derive(Clone, Debug)]
pub struct BcRow {
    pub row: usize,
    pub entries: Vec<(usize, f64)>,
    pub rhs: BcRhs,
    /// Factor the right-hand side is multiplied by (the row scaling).
    pub rhs_scale: f64,
}

#[derive(Clone, Debug)]
pub struct Layout {
    pub q: usize,
    pub n: usize,
    pub fitting: bool,
    base: Vec<usize>,
    pub total: usize,
    pub algebraic: Vec<bool>,
    /// Linear part `A_lin` on the evolved rows.
    pub a_lin: SparseRows,
    pub bc: Vec<BcRow>,
}

struct RowBuilder<'a> {
    layout: &'a Layout,
    st: &'a StencilSet,
    entries: Vec<(usize, f64)>,
}

impl RowBuilder<'_> {
    fn partial(mut self, node: NodeRef, d: usize, coef: f64) -> Self {
        let j = match node {
            NodeRef::Gamma(_, j) | NodeRef::Chi(_, j) => j,
        };
        let s = self.st.stencil(d, j);
        for (t, w) in s.weights.iter().enumerate() {
            let at = match node {
                NodeRef::Gamma(l, _) => NodeRef::Gamma(l, s.start + t),
                NodeRef::Chi(l, _) => NodeRef::Chi(l, s.start + t),
            };
            self.entries.push((self.layout.idx(at), coef * w));
        }
        self
    }

    fn finish(self, scale: f64) -> Vec<(usize, f64)> {
        let mut e: Vec<(usize, f64)> = Vec::new();
        for (j, v) in self.entries {
            match e.iter_mut().find(|x| x.0 == j) {
                Some(x) => x.1 += v * scale,
                None => e.push((j, v * scale)),
            }
        }
        e.retain(|x| x.1 != 0.0);
        e
    }
}

impl Layout {
    pub fn new(q: usize, n: usize, fitting: bool, k: usize, lambda: f64, sigma: f64, st: &StencilSet) -> Self {
        let fitting = fitting && q > 1;
        let mut base = Vec::with_capacity(q);
        let mut total = 0;
        for l in 0..q {
            base.push(total);
            total += (n + 1) * if fitting && l + 1 < q { 2 } else { 1 };
        }
        let mut lay = Self { q, n, fitting, base, total, algebraic: vec![false; total], a_lin: SparseRows::new(total), bc: Vec::new() };
        lay.build(k, lambda, sigma, st);
        lay
    }

    fn stride(&self, l: usize) -> usize {
        if self.fitting && l + 1 < self.q {
            2
        } else {
            1
        }
    }

    pub fn idx(&self, r: NodeRef) -> usize {
        match r {
            NodeRef::Gamma(l, j) => self.base[l] + j * self.stride(l),
            NodeRef::Chi(l, j) => self.base[l] + j * 2 + 1,
        }
    }

    fn row<'a>(&'a self, st: &'a StencilSet) -> RowBuilder<'a> {
        RowBuilder { layout: self, st, entries: Vec::new() }
    }

    fn build(&mut self, k: usize, lambda: f64, sigma: f64, st: &StencilSet) {
        let (q, n) = (self.q, self.n);
        let h = 1.0 / n as f64;
        let sgn = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
        let mut bc: Vec<BcRow> = Vec::new();
        let mut alg: Vec<usize> = Vec::new();
        let cluster = |mut nodes: Vec<usize>, eqs: Vec<(Vec<(usize, f64)>, BcRhs, f64)>, bc: &mut Vec<BcRow>, alg: &mut Vec<usize>| {
            debug_assert_eq!(nodes.len(), eqs.len());
            nodes.sort_unstable();
            for (row, (entries, rhs, rhs_scale)) in nodes.iter().zip(eqs) {
                bc.push(BcRow { row: *row, entries, rhs, rhs_scale });
                alg.push(*row);
            }
        };
        // ends
        for end in [false, true] {
            let l = if end { q - 1 } else { 0 };
            let node = |i: usize| NodeRef::Gamma(l, if end { n - i } else { i });
            let mut nodes = Vec::new();
            let mut eqs = Vec::new();
            for mu in 0..k {
                nodes.push(self.idx(node(mu)));
                let s = h.powi(mu as i32);
                let rhs = if mu == 0 { BcRhs::Point(if end { q } else { 0 }) } else { BcRhs::Clamp { end, mu } };
                eqs.push((self.row(st).partial(node(0), mu, 1.0).finish(s), rhs, s));
            }
            cluster(nodes, eqs, &mut bc, &mut alg);
        }
        // junctions
        for l in 0..q.saturating_sub(1) {
            let a_end = NodeRef::Gamma(l, n);
            let b_start = NodeRef::Gamma(l + 1, 0);
            let mut nodes = Vec::new();
            for i in 0..k {
                nodes.push(self.idx(NodeRef::Gamma(l, n - i)));
                nodes.push(self.idx(NodeRef::Gamma(l + 1, i)));
            }
            let mut eqs = Vec::new();
            for mu in 1..=2 * k - 2 {
                let s = h.powi(mu as i32);
                eqs.push((self.row(st).partial(b_start, mu, 1.0).partial(a_end, mu, -1.0).finish(s), BcRhs::Zero, s));
            }
            if self.fitting {
                let chi_end = NodeRef::Chi(l, n);
                nodes.push(self.idx(chi_end));
                eqs.push((self.row(st).partial(a_end, 0, 1.0).partial(b_start, 0, -1.0).finish(1.0), BcRhs::Zero, 1.0));
                eqs.push((self.row(st).partial(chi_end, 0, 1.0).partial(a_end, 0, -1.0).finish(1.0), BcRhs::Zero, 1.0));
                let s = h.powi(2 * k as i32 - 1);
                let bal = self
                    .row(st)
                    .partial(b_start, 2 * k - 1, sgn(k))
                    .partial(a_end, 2 * k - 1, -sgn(k))
                    .partial(chi_end, 1, 1.0 / (sigma * sigma))
                    .finish(s);
                eqs.push((bal, BcRhs::Zero, s));
                let chi_start = self.idx(NodeRef::Chi(l, 0));
                bc.push(BcRow { row: chi_start, entries: vec![(chi_start, 1.0)], rhs: BcRhs::Point(l + 1), rhs_scale: 1.0 });
                alg.push(chi_start);
            } else {
                eqs.push((self.row(st).partial(a_end, 0, 1.0).finish(1.0), BcRhs::Point(l + 1), 1.0));
                eqs.push((self.row(st).partial(b_start, 0, 1.0).finish(1.0), BcRhs::Point(l + 1), 1.0));
            }
            cluster(nodes, eqs, &mut bc, &mut alg);
        }
        for i in alg {
            self.algebraic[i] = true;
        }
        self.bc = bc;
        // evolved rows
        let mut a_lin = SparseRows::new(self.total);
        for l in 0..q {
            for j in 0..=n {
                let node = NodeRef::Gamma(l, j);
                let i = self.idx(node);
                if self.algebraic[i] {
                    continue;
                }
                let mut r = self.row(st).partial(node, 2 * k, sgn(k + 1));
                if lambda != 0.0 {
                    r = r.partial(node, 2, lambda);
                }
                a_lin.rows[i] = r.finish(1.0);
            }
            if self.fitting && l + 1 < q {
                for j in 0..=n {
                    let node = NodeRef::Chi(l, j);
                    let i = self.idx(node);
                    if !self.algebraic[i] {
                        a_lin.rows[i] = self.row(st).partial(node, 2, sigma * sigma).finish(1.0);
                    }
                }
            }
        }
        self.a_lin = a_lin;
    }

    /// `I − θ·dt·A_lin` on evolved rows, boundary rows elsewhere.
    pub fn system(&self, theta_dt: f64) -> SparseRows {
        let mut m = SparseRows::new(self.total);
        for i in 0..self.total {
            if self.algebraic[i] {
                continue;
            }
            m.add(i, i, 1.0);
            for &(j, v) in &self.a_lin.rows[i] {
                m.add(i, j, -theta_dt * v);
            }
        }
        for r in &self.bc {
            for &(j, v) in &r.entries {
                m.add(r.row, j, v);
            }
        }
        m
    }

    /// All node references in storage order.
    pub fn nodes(&self) -> Vec<NodeRef> {
        let mut out = vec![NodeRef::Gamma(0, 0); self.total];
        for l in 0..self.q {
            for j in 0..=self.n {
                out[self.idx(NodeRef::Gamma(l, j))] = NodeRef::Gamma(l, j);
                if self.fitting && l + 1 < self.q {
                    out[self.idx(NodeRef::Chi(l, j))] = NodeRef::Chi(l, j);
                }
            }
        }
        out
    }
}
