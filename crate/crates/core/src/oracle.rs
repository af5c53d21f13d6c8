//! Reference solutions in flat space, obtained by direct dense solves.
//!
//! For `λ = 0` a critical network is a piecewise polynomial of degree `2k−1` that interpolates
//! every knot, satisfies the clamps and is `C^{2k−2}` across junctions. For `k = 2`, `λ > 0` each
//! arc lies in `span{1, s, cosh ωs, sinh ωs}`, `ω = √λ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RsfError};
use crate::netstate::{ArcGrid, InterpolationProblem};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Basis {
    /// Monomials `s^i`, `i = 0..2k−1`.
    Polynomial,
    /// `{1, s, (cosh ωs − 1)/ω², (sinh ωs − ωs)/ω³}` (k = 2).
    Tension { omega: f64 },
}

/// Per-arc coefficients in the local variable `s = x − x_{l−1} ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolynomial {
    pub k: usize,
    pub dim: usize,
    pub basis: Basis,
    /// `coeffs[l][i][c]`: arc `l` (0-based), basis function `i`, coordinate `c`.
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

fn falling(i: usize, d: usize) -> f64 {
    (0..d).map(|t| (i - t) as f64).product()
}

/// `d`-th derivative of basis function `i` at `s`.
fn basis_derivative(basis: Basis, i: usize, d: usize, s: f64) -> f64 {
    match basis {
        Basis::Polynomial => {
            if d > i {
                0.0
            } else {
                falling(i, d) * s.powi((i - d) as i32)
            }
        }
        Basis::Tension { omega } => {
            let z = omega * s;
            let small = z.abs() < 1e-2;
            // f1 = sinh(z)/ω, f2 = (cosh z − 1)/ω², f3 = (sinh z − z)/ω³
            let w2 = omega * omega;
            let f1 = || if small { s * (1.0 + z * z / 6.0 + z.powi(4) / 120.0 + z.powi(6) / 5040.0) } else { z.sinh() / omega };
            let f2 = || {
                if small {
                    s * s * (0.5 + z * z / 24.0 + z.powi(4) / 720.0 + z.powi(6) / 40320.0)
                } else {
                    (z.cosh() - 1.0) / w2
                }
            };
            let f3 = || {
                if small {
                    s.powi(3) * (1.0 / 6.0 + z * z / 120.0 + z.powi(4) / 5040.0 + z.powi(6) / 362880.0)
                } else {
                    (z.sinh() - z) / (w2 * omega)
                }
            };
            match (i, d) {
                (0, 0) => 1.0,
                (0, _) => 0.0,
                (1, 0) => s,
                (1, 1) => 1.0,
                (1, _) => 0.0,
                // φ2 = f2: φ2' = f1, φ2'' = cosh, then ω² f2-chain
                (2, d) => match d % 2 {
                    0 if d == 0 => f2(),
                    0 => w2.powi((d as i32 - 2) / 2) * z.cosh(),
                    _ => w2.powi((d as i32 - 1) / 2) * f1(),
                },
                (3, 0) => f3(),
                (3, 1) => f2(),
                (3, d) => match d % 2 {
                    0 => w2.powi((d as i32 - 2) / 2) * f1(),
                    _ => w2.powi((d as i32 - 3) / 2) * z.cosh(),
                },
                _ => unreachable!("tension basis has four functions"),
            }
        }
    }
}

impl PiecewisePolynomial {
    pub fn q(&self) -> usize {
        self.coeffs.len()
    }

    fn n_basis(&self) -> usize {
        2 * self.k
    }

    /// `∂^d γ_l` at local coordinate `s` of 0-based arc `l`.
    pub fn eval_arc(&self, l: usize, s: f64, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for i in 0..self.n_basis() {
            let b = basis_derivative(self.basis, i, d, s);
            for c in 0..self.dim {
                out[c] += b * self.coeffs[l][i][c];
            }
        }
        out
    }

    /// Value at global `x ∈ [0, q]` (right-continuous at knots).
    pub fn eval(&self, x: f64, d: usize) -> Vec<f64> {
        let l = (x.floor() as usize).min(self.q() - 1);
        self.eval_arc(l, x - l as f64, d)
    }

    /// Samples on each arc at `N + 1` uniform nodes.
    pub fn sample(&self, n: usize) -> Vec<ArcGrid> {
        (0..self.q())
            .map(|l| ArcGrid::new(l + 1, (0..=n).map(|j| self.eval_arc(l, j as f64 / n as f64, 0)).collect()))
            .collect()
    }
}

fn solve(problem: &InterpolationProblem, basis: Basis) -> Result<PiecewisePolynomial> {
    let k = problem.k;
    let q = problem.q();
    let dim = problem.dim();
    let nb = 2 * k;
    let size = nb * q;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new(); // (row, rhs per coordinate)
    let mut r = 0;
    let put = |a: &mut DMatrix<f64>, row: usize, l: usize, s: f64, d: usize, sign: f64| {
        for i in 0..nb {
            a[(row, l * nb + i)] += sign * basis_derivative(basis, i, d, s);
        }
    };
    for l in 0..q {
        put(&mut a, r, l, 0.0, 0, 1.0);
        rows.push((r, problem.points[l].clone()));
        r += 1;
        put(&mut a, r, l, 1.0, 0, 1.0);
        rows.push((r, problem.points[l + 1].clone()));
        r += 1;
    }
    for mu in 1..k {
        put(&mut a, r, 0, 0.0, mu, 1.0);
        rows.push((r, problem.endpoint_derivatives.start[mu - 1].clone()));
        r += 1;
        put(&mut a, r, q - 1, 1.0, mu, 1.0);
        rows.push((r, problem.endpoint_derivatives.end[mu - 1].clone()));
        r += 1;
    }
    for l in 0..q.saturating_sub(1) {
        for mu in 1..=(2 * k - 2) {
            put(&mut a, r, l + 1, 0.0, mu, 1.0);
            put(&mut a, r, l, 1.0, mu, -1.0);
            rows.push((r, vec![0.0; dim]));
            r += 1;
        }
    }
    debug_assert_eq!(r, size);
    let lu = a.clone().lu();
    let mut coeffs = vec![vec![vec![0.0; dim]; nb]; q];
    for c in 0..dim {
        let mut b = DVector::<f64>::zeros(size);
        for (row, rhs) in &rows {
            b[*row] = rhs[c];
        }
        let x = lu
            .solve(&b)
            .ok_or_else(|| RsfError::SingularSystem("oracle constraint matrix is singular".into()))?;
        let resid = (&a * &x - &b).amax();
        let scale = 1.0 + b.amax() + x.amax();
        if !(resid <= 1e-10 * scale) {
            return Err(RsfError::SingularSystem(format!("oracle residual {resid:.3e}")));
        }
        for l in 0..q {
            for i in 0..nb {
                coeffs[l][i][c] = x[l * nb + i];
            }
        }
    }
    Ok(PiecewisePolynomial { k, dim, basis, coeffs })
}

/// Degree-`(2k−1)` spline: interpolation, clamps and `C^{2k−2}` junctions (`λ = 0`).
pub fn euclidean_spline(problem: &InterpolationProblem) -> Result<PiecewisePolynomial> {
    if !problem.manifold.is_euclidean() {
        return Err(RsfError::OracleUnavailable("closed-form splines need a Euclidean manifold".into()));
    }
    if problem.lambda != 0.0 {
        return Err(RsfError::OracleUnavailable("euclidean_spline requires λ = 0".into()));
    }
    solve(problem, Basis::Polynomial)
}

/// Tension spline (`k = 2`, `λ > 0`) in the basis `{1, s, cosh, sinh}`.
pub fn lambda_spline_ode(problem: &InterpolationProblem) -> Result<PiecewisePolynomial> {
    if !problem.manifold.is_euclidean() {
        return Err(RsfError::OracleUnavailable("closed-form splines need a Euclidean manifold".into()));
    }
    if problem.k != 2 {
        return Err(RsfError::UnsupportedOrder(format!("λ-splines are supported for k = 2 only, got k = {}", problem.k)));
    }
    if !(problem.lambda > 0.0) {
        return Err(RsfError::OracleUnavailable("lambda_spline_ode requires λ > 0".into()));
    }
    solve(problem, Basis::Tension { omega: problem.lambda.sqrt() })
}
