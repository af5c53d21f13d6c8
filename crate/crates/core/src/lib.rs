//! Higher-order Riemannian splines through gradient flows on embedded manifolds.
//!
//! A spline network `γ = (γ₁..γ_q)` through points `p₀..p_q` on `M ⊂ ℝⁿ` is evolved by the
//! gradient flow of `E = ½Σ∫|D^{k−1}γ_x|² + λ·½Σ∫|γ_x|²` (exact interpolation), or of the
//! penalised energy with one extra arc `χ_l` per interior point (fitting mode, weight `σ⁻²`).

pub mod calculus;
pub mod cli;
pub mod error;
pub mod flow;
pub mod lincheck;
pub mod manifold;
pub mod netstate;
pub mod oracle;
pub mod penalty;
pub mod vecops;

pub use error::{Result, RsfError};
