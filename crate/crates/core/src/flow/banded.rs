//! Banded LU factorisation with partial pivoting (LINPACK `gbfa`/`gbsl` layout).

use crate::error::{Result, RsfError};

/// `A = P·L·U` for a matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    a: Vec<f64>,
    l: Vec<f64>,
    piv: Vec<usize>,
}

/// Row-wise sparse matrix used for assembly.
#[derive(Clone, Debug, Default)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.rows[i].push((j, v));
        }
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, _) in r {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// `(A x)_i`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }
}

impl BandedLu {
    pub fn factor(m: &SparseRows) -> Result<Self> {
        let n = m.rows.len();
        let (kl, ku) = m.bandwidths();
        let w = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, w, a: vec![0.0; n * w], l: vec![0.0; n * kl.max(1)], piv: vec![0; n] };
        let mut scale: f64 = 0.0;
        for (i, r) in m.rows.iter().enumerate() {
            for &(j, v) in r {
                *lu.at(i, j) += v;
                scale = scale.max(v.abs());
            }
        }
        let span = kl + ku;
        for i in 0..n {
            let rmax = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = lu.get(i, i).abs();
            for r in i + 1..=rmax {
                let v = lu.get(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(RsfError::SingularSystem(format!("zero pivot in column {i} of {n}")));
            }
            lu.piv[i] = p;
            let cmax = (i + span).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    let (x, y) = (lu.get(i, c), lu.get(p, c));
                    *lu.at(i, c) = y;
                    *lu.at(p, c) = x;
                }
            }
            let d = lu.get(i, i);
            for r in i + 1..=rmax {
                let f = lu.get(r, i) / d;
                lu.l[i * kl + (r - i - 1)] = f;
                *lu.at(r, i) = 0.0;
                if f != 0.0 {
                    for c in i + 1..=cmax {
                        let u = lu.get(i, c);
                        *lu.at(r, c) -= f * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.w + (j + self.kl - i)]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.w + (j + self.kl - i)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let p = self.piv[i];
            b.swap(i, p);
            let bi = b[i];
            for r in i + 1..=(i + self.kl).min(n - 1) {
                b[r] -= self.l[i * self.kl + (r - i - 1)] * bi;
            }
        }
        let span = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + span).min(n - 1) {
                s -= self.get(i, c) * b[c];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let n = 30;
        let mut m = SparseRows::new(n);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 3).min(n) {
                // small diagonal forces row interchanges
                let v = if i == j { 1e-3 } else { ((i * 7 + j * 13) % 11) as f64 - 5.0 };
                m.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let lu = BandedLu::factor(&m).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        // the matrix has condition ~1e7: compare backward errors rather than solutions
        let x = DVector::from_vec(x);
        let r = &dense * &x - DVector::from_vec(rhs);
        let backward = r.amax() / (dense.amax() * x.amax() * n as f64);
        assert!(backward < 1e-15, "relative backward error {backward}");
    }

    #[test]
    fn singular_detected() {
        let mut m = SparseRows::new(3);
        m.add(0, 0, 1.0);
        m.add(1, 0, 1.0);
        m.add(2, 2, 1.0);
        assert!(matches!(BandedLu::factor(&m), Err(RsfError::SingularSystem(_))));
    }
}
