use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsfError {
    #[error("retraction undefined at this point: {0}")]
    DegeneratePoint(String),
    #[error("point is off the manifold (violation {violation:.3e} > {limit:.3e})")]
    OffManifoldPoint { violation: f64, limit: f64 },
    #[error("input vector is not tangent (normal component {normal:.3e} > {limit:.3e})")]
    NonTangentInput { normal: f64, limit: f64 },
    #[error("points are conjugate or on the cut locus: {0}")]
    ConjugateConfiguration(String),
    #[error("infeasible boundary data: {0}")]
    InfeasibleBoundaryData(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("stability blow-up at t = {t}: {detail}")]
    StabilityBlowup { t: f64, detail: String },
    #[error("boundary retraction failed: {0}")]
    RetractionFailure(String),
    #[error("invalid arity: {0}")]
    InvalidArity(String),
    #[error("zero frequency p = 0")]
    ZeroFrequency,
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("continuation stage {stage} (σ = {sigma}) hit its time budget")]
    NonconvergentStage { stage: usize, sigma: f64 },
    #[error("time step {dt:.3e} exceeds the explicit stability limit {limit:.3e}")]
    UnstableTimeStep { dt: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, RsfError>;
