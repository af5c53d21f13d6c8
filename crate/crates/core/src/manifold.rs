//! Embedded manifolds `M ⊂ ℝⁿ` with closed-form geometry.
//!
//! Three instances are supported: Euclidean space `ℝᵐ`, the unit sphere `Sᵐ ⊂ ℝᵐ⁺¹` and
//! `SO(3) ⊂ ℝ⁹` (row-major 3×3 matrices, Frobenius inner product). Curvature follows
//! `R(X,Y)Z = D_X D_Y Z − D_Y D_X Z − D_[X,Y] Z`, so the unit sphere has sectional curvature +1,
//! and the Gauss equation reads `⟨R(X,Y)Z, W⟩ = ⟨Π(Y,Z), Π(X,W)⟩ − ⟨Π(X,Z), Π(Y,W)⟩`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfError};
use crate::vecops::{dot, norm};

/// Point or vector in the ambient space.
pub type AmbientVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldKind {
    Euclidean(usize),
    Sphere(usize),
    SpecialOrthogonal3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedManifold {
    kind: ManifoldKind,
    tolerance: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

impl EmbeddedManifold {
    pub fn new(kind: ManifoldKind) -> Self {
        Self { kind, tolerance: DEFAULT_TOLERANCE }
    }

    pub fn euclidean(m: usize) -> Self {
        Self::new(ManifoldKind::Euclidean(m))
    }

    pub fn sphere(m: usize) -> Self {
        Self::new(ManifoldKind::Sphere(m))
    }

    pub fn so3() -> Self {
        Self::new(ManifoldKind::SpecialOrthogonal3)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Parses `"euclidean:m"`, `"sphere:m"` or `"so3"`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        if name == "so3" {
            return Ok(Self::so3());
        }
        let (head, dim) = name
            .split_once(':')
            .ok_or_else(|| RsfError::InvalidConfig(format!("unknown manifold '{name}'")))?;
        let m: usize = dim
            .parse()
            .map_err(|_| RsfError::InvalidConfig(format!("bad manifold dimension in '{name}'")))?;
        if m == 0 {
            return Err(RsfError::InvalidConfig("manifold dimension must be ≥ 1".into()));
        }
        match head {
            "euclidean" => Ok(Self::euclidean(m)),
            "sphere" => Ok(Self::sphere(m)),
            _ => Err(RsfError::InvalidConfig(format!("unknown manifold '{name}'"))),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ManifoldKind::Euclidean(m) => format!("euclidean:{m}"),
            ManifoldKind::Sphere(m) => format!("sphere:{m}"),
            ManifoldKind::SpecialOrthogonal3 => "so3".into(),
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, ManifoldKind::Euclidean(_))
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean(m) => m,
            ManifoldKind::Sphere(m) => m + 1,
            ManifoldKind::SpecialOrthogonal3 => 9,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean(m) | ManifoldKind::Sphere(m) => m,
            ManifoldKind::SpecialOrthogonal3 => 3,
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(RsfError::InvalidArity(format!(
                "expected ambient dimension {}, got {}",
                self.ambient_dim(),
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(RsfError::DegeneratePoint("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// Distance-like measure of how far `p` is from `M`.
    pub fn constraint_violation(&self, p: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean(_) => 0.0,
            ManifoldKind::Sphere(_) => (norm(p) - 1.0).abs(),
            ManifoldKind::SpecialOrthogonal3 => {
                let a = mat3(p);
                let e = a.transpose() * a - Matrix3::identity();
                let det = a.determinant();
                e.norm() + if det < 0.0 { 2.0 } else { 0.0 }
            }
        }
    }

    fn check_on(&self, p: &[f64]) -> Result<()> {
        self.check_dim(p)?;
        let violation = self.constraint_violation(p);
        let limit = 10.0 * self.tolerance;
        if violation > limit {
            return Err(RsfError::OffManifoldPoint { violation, limit });
        }
        Ok(())
    }

    fn check_tangent(&self, p: &[f64], v: &[f64]) -> Result<()> {
        self.check_dim(v)?;
        let mut t = vec![0.0; v.len()];
        self.tangent_into(p, v, &mut t);
        let normal = v.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let limit = 10.0 * self.tolerance * (1.0 + norm(v));
        if normal > limit {
            return Err(RsfError::NonTangentInput { normal, limit });
        }
        Ok(())
    }

    /// Nearest-point retraction onto `M`.
    pub fn project_point(&self, v: &[f64]) -> Result<AmbientVector> {
        self.check_dim(v)?;
        match self.kind {
            ManifoldKind::Euclidean(_) => Ok(v.to_vec()),
            ManifoldKind::Sphere(_) => {
                let r = norm(v);
                if r < 1e-300 || !r.is_finite() {
                    return Err(RsfError::DegeneratePoint("zero vector has no radial projection".into()));
                }
                Ok(v.iter().map(|x| x / r).collect())
            }
            ManifoldKind::SpecialOrthogonal3 => {
                let a = mat3(v);
                let det = a.determinant();
                if !(det > 1e-12 * a.norm().powi(3).max(1e-300)) {
                    return Err(RsfError::DegeneratePoint(format!(
                        "3×3 block with determinant {det:.3e} has no rotation polar factor"
                    )));
                }
                Ok(flat3(&polar_factor(a)?))
            }
        }
    }

    /// Orthogonal projection onto `T_pM` (no input checks).
    pub fn tangent_into(&self, p: &[f64], v: &[f64], out: &mut [f64]) {
        match self.kind {
            ManifoldKind::Euclidean(_) => out.copy_from_slice(v),
            ManifoldKind::Sphere(_) => {
                let c = dot(p, v) / dot(p, p);
                for i in 0..v.len() {
                    out[i] = v[i] - c * p[i];
                }
            }
            ManifoldKind::SpecialOrthogonal3 => {
                // P_p(V) = ½(V − p Vᵀ p)
                let pm = mat3(p);
                let vm = mat3(v);
                let t = (vm - pm * vm.transpose() * pm) * 0.5;
                out.copy_from_slice(&flat3(&t));
            }
        }
    }

    pub fn project_tangent(&self, p: &[f64], v: &[f64]) -> Result<AmbientVector> {
        self.check_on(p)?;
        self.check_dim(v)?;
        let mut out = vec![0.0; v.len()];
        self.tangent_into(p, v, &mut out);
        Ok(out)
    }

    /// Adds `c · Π_p(u, v)` to `out` using the polynomial closed form (trilinear in `p, u, v`).
    #[inline]
    pub fn sff_accumulate(&self, p: &[f64], u: &[f64], v: &[f64], c: f64, out: &mut [f64]) {
        match self.kind {
            ManifoldKind::Euclidean(_) => {}
            ManifoldKind::Sphere(_) => {
                let s = -c * dot(u, v);
                for i in 0..p.len() {
                    out[i] += s * p[i];
                }
            }
            ManifoldKind::SpecialOrthogonal3 => {
                // ½(U pᵀ V + V pᵀ U)
                let mut ptv = [0.0; 9];
                let mut ptu = [0.0; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        let mut a = 0.0;
                        let mut b = 0.0;
                        for r in 0..3 {
                            a += p[3 * r + i] * v[3 * r + j];
                            b += p[3 * r + i] * u[3 * r + j];
                        }
                        ptv[3 * i + j] = a;
                        ptu[3 * i + j] = b;
                    }
                }
                let h = 0.5 * c;
                for i in 0..3 {
                    for j in 0..3 {
                        let mut s = 0.0;
                        for r in 0..3 {
                            s += u[3 * i + r] * ptv[3 * r + j] + v[3 * i + r] * ptu[3 * r + j];
                        }
                        out[3 * i + j] += h * s;
                    }
                }
            }
        }
    }

    pub fn second_fundamental_form(&self, p: &[f64], u: &[f64], v: &[f64]) -> Result<AmbientVector> {
        self.check_on(p)?;
        self.check_tangent(p, u)?;
        self.check_tangent(p, v)?;
        let mut out = vec![0.0; p.len()];
        self.sff_accumulate(p, u, v, 1.0, &mut out);
        Ok(out)
    }

    /// Closed-form curvature `R_p(x, y) z` (no input checks).
    pub fn curvature_into(&self, p: &[f64], x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        match self.kind {
            ManifoldKind::Euclidean(_) => out.iter_mut().for_each(|o| *o = 0.0),
            ManifoldKind::Sphere(_) => {
                let a = dot(y, z);
                let b = dot(x, z);
                for i in 0..out.len() {
                    out[i] = a * x[i] - b * y[i];
                }
            }
            ManifoldKind::SpecialOrthogonal3 => {
                // left-trivialise: X = pA; R = p·(−¼[[A,B],C])
                let pm = mat3(p);
                let pt = pm.transpose();
                let a = pt * mat3(x);
                let b = pt * mat3(y);
                let c = pt * mat3(z);
                let ab = a * b - b * a;
                let r = pm * ((ab * c - c * ab) * -0.25);
                out.copy_from_slice(&flat3(&r));
            }
        }
    }

    pub fn curvature(&self, p: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Result<AmbientVector> {
        self.check_on(p)?;
        for v in [x, y, z] {
            self.check_tangent(p, v)?;
        }
        let mut out = vec![0.0; p.len()];
        self.curvature_into(p, x, y, z, &mut out);
        Ok(out)
    }

    /// Curvature assembled from Π alone via the Gauss equation (independent cross-check).
    pub fn curvature_gauss(&self, p: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Result<AmbientVector> {
        self.check_on(p)?;
        for v in [x, y, z] {
            self.check_tangent(p, v)?;
        }
        let n = p.len();
        let mut pyz = vec![0.0; n];
        let mut pxz = vec![0.0; n];
        self.sff_accumulate(p, y, z, 1.0, &mut pyz);
        self.sff_accumulate(p, x, z, 1.0, &mut pxz);
        let mut out = vec![0.0; n];
        for e in self.tangent_basis(p) {
            let mut pxe = vec![0.0; n];
            let mut pye = vec![0.0; n];
            self.sff_accumulate(p, x, &e, 1.0, &mut pxe);
            self.sff_accumulate(p, y, &e, 1.0, &mut pye);
            let c = dot(&pyz, &pxe) - dot(&pxz, &pye);
            for i in 0..n {
                out[i] += c * e[i];
            }
        }
        Ok(out)
    }

    /// Orthonormal basis of `T_pM`.
    pub fn tangent_basis(&self, p: &[f64]) -> Vec<AmbientVector> {
        let n = self.ambient_dim();
        match self.kind {
            ManifoldKind::Euclidean(_) => (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            ManifoldKind::Sphere(m) => {
                // Gram–Schmidt on the standard basis, skipping the most normal direction
                let pn = norm(p);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| p[a].abs().partial_cmp(&p[b].abs()).unwrap());
                let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
                for &i in order.iter().take(m) {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    let c = p[i] / (pn * pn);
                    for r in 0..n {
                        e[r] -= c * p[r];
                    }
                    for b in &basis {
                        let c = dot(&e, b);
                        for r in 0..n {
                            e[r] -= c * b[r];
                        }
                    }
                    let s = norm(&e);
                    basis.push(e.iter().map(|x| x / s).collect());
                }
                basis
            }
            ManifoldKind::SpecialOrthogonal3 => {
                let pm = mat3(p);
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [(1, 2), (2, 0), (0, 1)]
                    .iter()
                    .map(|&(i, j)| {
                        let mut a = Matrix3::zeros();
                        a[(i, j)] = s;
                        a[(j, i)] = -s;
                        flat3(&(pm * a))
                    })
                    .collect()
            }
        }
    }

    /// Constant-speed minimizing geodesic from `p` (s = 0) to `q` (s = 1).
    pub fn geodesic(&self, p: &[f64], q: &[f64], s: f64) -> Result<AmbientVector> {
        self.check_on(p)?;
        self.check_on(q)?;
        match self.kind {
            ManifoldKind::Euclidean(_) => Ok(p.iter().zip(q).map(|(a, b)| (1.0 - s) * a + s * b).collect()),
            ManifoldKind::Sphere(_) => {
                let c = dot(p, q).clamp(-1.0, 1.0);
                if c < -1.0 + 1e-12 {
                    return Err(RsfError::ConjugateConfiguration("antipodal points on the sphere".into()));
                }
                let omega = c.acos();
                if omega < 1e-8 {
                    let v: Vec<f64> = p.iter().zip(q).map(|(a, b)| (1.0 - s) * a + s * b).collect();
                    return self.project_point(&v);
                }
                let so = omega.sin();
                let a = ((1.0 - s) * omega).sin() / so;
                let b = (s * omega).sin() / so;
                Ok(p.iter().zip(q).map(|(x, y)| a * x + b * y).collect())
            }
            ManifoldKind::SpecialOrthogonal3 => {
                let pm = mat3(p);
                let rel = pm.transpose() * mat3(q);
                let omega = so3_log(&rel)?;
                Ok(flat3(&(pm * so3_exp(&(omega * s)))))
            }
        }
    }

    /// Initial velocity of the geodesic from `p` to `q` (the Riemannian logarithm).
    pub fn log_map(&self, p: &[f64], q: &[f64]) -> Result<AmbientVector> {
        self.check_on(p)?;
        self.check_on(q)?;
        match self.kind {
            ManifoldKind::Euclidean(_) => Ok(q.iter().zip(p).map(|(a, b)| a - b).collect()),
            ManifoldKind::Sphere(_) => {
                let c = dot(p, q).clamp(-1.0, 1.0);
                if c < -1.0 + 1e-12 {
                    return Err(RsfError::ConjugateConfiguration("antipodal points on the sphere".into()));
                }
                let omega = c.acos();
                let w: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - c * b).collect();
                let wn = norm(&w);
                if wn < 1e-300 {
                    return Ok(vec![0.0; p.len()]);
                }
                Ok(w.iter().map(|x| x * omega / wn).collect())
            }
            ManifoldKind::SpecialOrthogonal3 => {
                let pm = mat3(p);
                let omega = so3_log(&(pm.transpose() * mat3(q)))?;
                Ok(flat3(&(pm * omega)))
            }
        }
    }
}

/// Row-major 9-vector → 3×3 matrix.
pub fn mat3(v: &[f64]) -> Matrix3<f64> {
    Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

/// 3×3 matrix → row-major 9-vector.
pub fn flat3(m: &Matrix3<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Orthogonal polar factor by Newton averaging `X ← ½(X + X⁻ᵀ)`.
fn polar_factor(a: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let mut x = a;
    for _ in 0..100 {
        let inv = x
            .try_inverse()
            .ok_or_else(|| RsfError::DegeneratePoint("singular 3×3 block".into()))?;
        let next = (x + inv.transpose()) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(x)
}

/// Skew logarithm of a rotation.
fn so3_log(r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = c.acos();
    if std::f64::consts::PI - theta < 1e-6 {
        return Err(RsfError::ConjugateConfiguration("rotations are a half-turn apart".into()));
    }
    let skew = (r - r.transpose()) * 0.5;
    let factor = if theta < 1e-4 {
        1.0 + theta * theta / 6.0 + 7.0 * theta.powi(4) / 360.0
    } else {
        theta / theta.sin()
    };
    Ok(skew * factor)
}

/// Rodrigues exponential of a skew matrix.
fn so3_exp(w: &Matrix3<f64>) -> Matrix3<f64> {
    let theta = (0.5 * (w.transpose() * w).trace()).sqrt();
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Matrix3::identity() + w * a + w * w * b
}
