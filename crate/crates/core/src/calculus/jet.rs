//! Truncated Taylor jets of vector fields at a grid node.
//!
//! A jet of order `r` stores the derivatives `f, ∂f, …, ∂^r f` of an ambient-valued field;
//! products follow the Leibniz rule, so polynomial closed forms (Π, tangent projectors) can be
//! differentiated exactly given finite-difference jets of the curve.

use crate::manifold::EmbeddedManifold;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    n: usize,
    data: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl Jet {
    pub fn zeros(n: usize, order: usize) -> Self {
        Self { n, data: vec![0.0; n * (order + 1)] }
    }

    pub fn from_derivatives(derivs: &[Vec<f64>]) -> Self {
        let n = derivs[0].len();
        let mut data = Vec::with_capacity(n * derivs.len());
        for d in derivs {
            data.extend_from_slice(d);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.data.len() / self.n - 1
    }

    /// `∂^i f`.
    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Jet of `∂f` (order drops by one).
    pub fn derivative(&self) -> Jet {
        Jet { n: self.n, data: self.data[self.n..].to_vec() }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        Jet { n: self.n, data: self.data[..(order + 1) * self.n].to_vec() }
    }

    pub fn sub_assign(&mut self, other: &Jet) {
        let len = self.data.len().min(other.data.len());
        for i in 0..len {
            self.data[i] -= other.data[i];
        }
    }
}

/// Jet of `Π_γ(u, v)` through order `order`, using the trilinear closed form.
pub fn sff_jet(m: &EmbeddedManifold, g: &Jet, u: &Jet, v: &Jet, order: usize) -> Jet {
    let n = g.dim();
    let mut out = Jet::zeros(n, order);
    if m.is_euclidean() {
        return out;
    }
    for j in 0..=order {
        let slot = &mut out.data[j * n..(j + 1) * n];
        for a in 0..=j {
            let ca = binomial(j, a);
            for b in 0..=(j - a) {
                let c = j - a - b;
                let coeff = ca * binomial(j - a, b);
                m.sff_accumulate(g.get(a), u.get(b), v.get(c), coeff, slot);
            }
        }
    }
    out
}

/// Covariant derivatives `V_i = D^i V_0` along `γ` for `i = 0..=count`, by `D V = ∂V − Π(V, ∂γ)`.
///
/// `g` is the jet of `γ`; `v0` the jet of the field. `V_i` has order `order(v0) − i`.
pub fn field_chain(m: &EmbeddedManifold, g: &Jet, v0: Jet, count: usize) -> Vec<Jet> {
    let gx = g.derivative();
    let mut chain = Vec::with_capacity(count + 1);
    chain.push(v0);
    for _ in 0..count {
        let prev = chain.last().unwrap();
        let r = prev.order() - 1;
        let mut next = prev.derivative();
        let pi = sff_jet(m, g, prev, &gx, r);
        next.sub_assign(&pi);
        chain.push(next);
    }
    chain
}

/// `D^i ∂γ` for `i = 0..=count`.
pub fn covariant_chain(m: &EmbeddedManifold, g: &Jet, count: usize) -> Vec<Jet> {
    field_chain(m, g, g.derivative(), count)
}
