//! Roots `ξ_μ` of `ξ^{2k} = −p`, the polynomial `M⁺` and the Vandermonde determinants that
//! certify the complementary condition.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfError};

/// `|Re ξ|` below this (relative to `|ξ|`) counts as on the imaginary axis.
pub const AXIS_TOL: f64 = 1e-12;
pub const DET_FLOOR: f64 = 1e-8;
pub const IDENTITY_TOL: f64 = 1e-12;

/// Which roots enter `M⁺`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSelection {
    /// `Re ξ > 0`: available when exactly `k` roots lie strictly right of the axis.
    PositiveRealPart,
    /// `Im ξ > 0`, used when roots sit on the imaginary axis (always `k` of them for `p ≠ 0`
    /// with `Re p ≥ 0`).
    UpperHalfPlane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub k: usize,
    pub p: Complex64,
    pub theta_p: f64,
    pub d_p: Complex64,
    /// `ξ_μ = d_p e^{iμπ/k}`, `μ = 1..2k` (index `μ − 1`).
    pub xi: Vec<Complex64>,
    /// Labels `μ` with `Re ξ_μ > 0`, `< 0` and `≈ 0`.
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub on_axis: Vec<usize>,
    /// Labels with `Im ξ_μ > 0`.
    pub upper: Vec<usize>,
    pub distinct: bool,
    pub selection: RootSelection,
    /// Labels of the roots of `M⁺`.
    pub mplus_roots: Vec<usize>,
    /// Coefficients of `M⁺`, ascending powers; the last one is `1`.
    pub mplus: Vec<Complex64>,
}

impl RootSet {
    /// Exactly `k` roots with `Re > 0` and `k` with `Re < 0`.
    pub fn partition_ok(&self) -> bool {
        self.positive.len() == self.k && self.negative.len() == self.k
    }

    pub fn mplus_values(&self) -> Vec<Complex64> {
        self.mplus_roots.iter().map(|&mu| self.xi[mu - 1]).collect()
    }

    /// `M⁺(z)` by Horner.
    pub fn eval_mplus(&self, z: Complex64) -> Complex64 {
        self.mplus.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
}

fn check_p(p: Complex64) -> Result<()> {
    if p == Complex64::new(0.0, 0.0) {
        return Err(RsfError::ZeroFrequency);
    }
    if !(p.re >= 0.0) || !p.im.is_finite() {
        return Err(RsfError::InvalidConfig(format!("frequency p = {p} must satisfy Re p ≥ 0")));
    }
    Ok(())
}

/// Ascending coefficients of `∏(z − r)`.
pub fn monic_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

pub fn roots_and_mplus(k: usize, p: Complex64) -> Result<RootSet> {
    if k < 1 {
        return Err(RsfError::InvalidArity("k must be ≥ 1".into()));
    }
    check_p(p)?;
    let theta_p = p.arg();
    let kf = k as f64;
    let d_p = Complex64::from_polar(p.norm().powf(1.0 / (2.0 * kf)), (theta_p - std::f64::consts::PI) / (2.0 * kf));
    let xi: Vec<Complex64> = (1..=2 * k)
        .map(|mu| d_p * Complex64::from_polar(1.0, mu as f64 * std::f64::consts::PI / kf))
        .collect();
    let (mut positive, mut negative, mut on_axis, mut upper) = (vec![], vec![], vec![], vec![]);
    for (i, z) in xi.iter().enumerate() {
        let mu = i + 1;
        let tol = AXIS_TOL * z.norm();
        if z.re > tol {
            positive.push(mu);
        } else if z.re < -tol {
            negative.push(mu);
        } else {
            on_axis.push(mu);
        }
        if z.im > tol {
            upper.push(mu);
        }
    }
    let mut distinct = true;
    for i in 0..xi.len() {
        for j in i + 1..xi.len() {
            if (xi[i] - xi[j]).norm() <= 1e-12 * xi[i].norm() {
                distinct = false;
            }
        }
    }
    let (selection, mplus_roots) = if positive.len() == k {
        (RootSelection::PositiveRealPart, positive.clone())
    } else {
        (RootSelection::UpperHalfPlane, upper.clone())
    };
    let vals: Vec<Complex64> = mplus_roots.iter().map(|&mu| xi[mu - 1]).collect();
    let mplus = monic_from_roots(&vals);
    Ok(RootSet { k, p, theta_p, d_p, xi, positive, negative, on_axis, upper, distinct, selection, mplus_roots, mplus })
}

/// Determinants of `C` (rows `(iξ_r)^j`), `D` (rows `ξ_r^{2j}`) and `E` (rows `ξ_r^{2j+1}`),
/// `j = 0..k−1`, over the roots of `M⁺`, each by LU and by closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VandermondeChecks {
    pub k: usize,
    pub p: Complex64,
    pub det_c: Complex64,
    pub det_d: Complex64,
    pub det_e: Complex64,
    pub det_c_closed: Complex64,
    pub det_d_closed: Complex64,
    /// `∏ξ_j · det D`.
    pub det_e_identity: Complex64,
    /// `|det E − ∏ξ_j det D| / |det E|`.
    pub identity_error: f64,
    /// Relative gap between LU and closed-form `det C`, `det D`.
    pub closed_form_error: f64,
    pub min_abs_det: f64,
    pub nonzero: bool,
    pub identity_ok: bool,
}

fn det(rows: &[Vec<Complex64>]) -> Complex64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.lu().determinant()
}

fn vandermonde_product(x: &[Complex64]) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for nu in 0..x.len() {
        for mu in 0..nu {
            prod *= x[nu] - x[mu];
        }
    }
    prod
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

pub fn vandermonde_checks(k: usize, p: Complex64) -> Result<VandermondeChecks> {
    let roots = roots_and_mplus(k, p)?;
    Ok(vandermonde_from_roots(&roots))
}

pub fn vandermonde_from_roots(roots: &RootSet) -> VandermondeChecks {
    let k = roots.k;
    let x = roots.mplus_values();
    let i = Complex64::i();
    let c_rows: Vec<Vec<Complex64>> = x.iter().map(|z| (0..k).map(|j| (i * z).powu(j as u32)).collect()).collect();
    let d_rows: Vec<Vec<Complex64>> = x.iter().map(|z| (0..k).map(|j| z.powu(2 * j as u32)).collect()).collect();
    let e_rows: Vec<Vec<Complex64>> = x.iter().map(|z| (0..k).map(|j| z.powu(2 * j as u32 + 1)).collect()).collect();
    let (det_c, det_d, det_e) = (det(&c_rows), det(&d_rows), det(&e_rows));
    let ix: Vec<Complex64> = x.iter().map(|z| i * z).collect();
    let sq: Vec<Complex64> = x.iter().map(|z| z * z).collect();
    let det_c_closed = vandermonde_product(&ix);
    let det_d_closed = vandermonde_product(&sq);
    let prod: Complex64 = x.iter().product();
    let det_e_identity = prod * det_d;
    let identity_error = rel(det_e, det_e_identity);
    let closed_form_error = rel(det_c, det_c_closed).max(rel(det_d, det_d_closed));
    let min_abs_det = det_c.norm().min(det_d.norm()).min(det_e.norm());
    VandermondeChecks {
        k,
        p: roots.p,
        det_c,
        det_d,
        det_e,
        det_c_closed,
        det_d_closed,
        det_e_identity,
        identity_error,
        closed_form_error,
        min_abs_det,
        nonzero: min_abs_det > DET_FLOOR,
        identity_ok: identity_error <= IDENTITY_TOL,
    }
}

/// `θ` uniform on `[−π/2, π/2]` (`count` samples, endpoints included) on the unit circle,
/// followed by `10^{−3}` and `10^{3}`.
pub fn sweep_frequencies(count: usize) -> Vec<Complex64> {
    let h = std::f64::consts::PI;
    let mut out: Vec<Complex64> = (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { -h / 2.0 + h * i as f64 / (count - 1) as f64 };
            Complex64::from_polar(1.0, t)
        })
        .collect();
    out.push(Complex64::new(1e-3, 0.0));
    out.push(Complex64::new(1e3, 0.0));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub p: Complex64,
    pub positive: usize,
    pub negative: usize,
    pub on_axis: usize,
    pub upper: usize,
    pub partition_ok: bool,
    pub selection: RootSelection,
    pub min_abs_det: f64,
    pub identity_error: f64,
    pub closed_form_error: f64,
    pub nonzero: bool,
    pub identity_ok: bool,
}

pub fn sweep(ks: &[usize], ps: &[Complex64]) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::with_capacity(ks.len() * ps.len());
    for &k in ks {
        for &p in ps {
            let r = roots_and_mplus(k, p)?;
            let v = vandermonde_from_roots(&r);
            out.push(SweepEntry {
                k,
                p,
                positive: r.positive.len(),
                negative: r.negative.len(),
                on_axis: r.on_axis.len(),
                upper: r.upper.len(),
                partition_ok: r.partition_ok(),
                selection: r.selection,
                min_abs_det: v.min_abs_det,
                identity_error: v.identity_error,
                closed_form_error: v.closed_form_error,
                nonzero: v.nonzero,
                identity_ok: v.identity_ok,
            });
        }
    }
    Ok(out)
}
