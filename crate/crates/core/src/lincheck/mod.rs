//! Algebraic checks of the linear theory: boundary-operator assembly, the roots `ξ_μ` and `M⁺`,
//! Vandermonde determinants certifying the complementary condition, and order-zero
//! compatibility of initial data.

mod compat;
mod matrices;
mod roots;

pub use compat::{compatibility, compatibility_order_zero, CompatLine, CompatibilityReport, LineKind, TRUNCATION_FACTOR};
pub use matrices::{
    assemble_boundary_matrices, b0, b2, Block, BoundaryOperator, BoundaryOperatorMatrix, Entry, PhiEntry, PolyMatrix,
    ShapeCheck, Term,
};
pub use roots::{
    monic_from_roots, roots_and_mplus, sweep, sweep_frequencies, vandermonde_checks, vandermonde_from_roots, RootSelection,
    RootSet, SweepEntry, VandermondeChecks, AXIS_TOL, DET_FLOOR, IDENTITY_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which frequencies and orders to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub ks: Vec<usize>,
    /// Samples of `θ` on `[−π/2, π/2]`; `10^{±3}` are always appended.
    pub theta_samples: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { ks: vec![2, 3, 4, 5], theta_samples: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub samples: usize,
    pub partition_failures: usize,
    pub min_abs_det: f64,
    pub max_identity_error: f64,
    pub max_closed_form_error: f64,
    pub all_nonzero: bool,
    pub all_identity_ok: bool,
    pub all_partition_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTheoryReport {
    pub k: usize,
    pub n: usize,
    pub q: usize,
    pub shapes: Vec<ShapeCheck>,
    pub shapes_ok: bool,
    pub sweep: Vec<SweepEntry>,
    pub summary: SweepSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compatibility: Option<CompatibilityReport>,
}

impl LinearTheoryReport {
    /// Determinants above the floor and all shapes consistent.
    pub fn passes(&self) -> bool {
        self.shapes_ok && self.summary.all_nonzero
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub fn summarize(entries: &[SweepEntry]) -> SweepSummary {
    SweepSummary {
        samples: entries.len(),
        partition_failures: entries.iter().filter(|e| !e.partition_ok).count(),
        min_abs_det: entries.iter().map(|e| e.min_abs_det).fold(f64::INFINITY, f64::min),
        max_identity_error: entries.iter().map(|e| e.identity_error).fold(0.0, f64::max),
        max_closed_form_error: entries.iter().map(|e| e.closed_form_error).fold(0.0, f64::max),
        all_nonzero: entries.iter().all(|e| e.nonzero),
        all_identity_ok: entries.iter().all(|e| e.identity_ok),
        all_partition_ok: entries.iter().all(|e| e.partition_ok),
    }
}

pub fn linear_theory_report(k: usize, n: usize, q: usize, spec: &SweepSpec) -> Result<LinearTheoryReport> {
    let mats = assemble_boundary_matrices(k, n, q)?;
    let shapes = mats.shape_checks();
    let shapes_ok = shapes.iter().all(|s| s.ok);
    let entries = sweep(&spec.ks, &sweep_frequencies(spec.theta_samples))?;
    let summary = summarize(&entries);
    Ok(LinearTheoryReport { k, n, q, shapes, shapes_ok, sweep: entries, summary, compatibility: None })
}
