//! JSON run configuration.

use serde::{Deserialize, Serialize};

use crate::calculus::DEFAULT_ORDER;
use crate::error::{Result, RsfError};
use crate::flow::{FlowConfig, Scheme, TimeStep};
use crate::manifold::{AmbientVector, EmbeddedManifold};
use crate::netstate::{EndpointDerivatives, InitStrategy, InterpolationProblem, Mode, NetworkState};
use crate::penalty::{ComparisonNorm, ContinuationPlan, StageOverride, StartMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `euclidean:m`, `sphere:m` or `so3`.
    pub manifold: String,
    pub problem: ProblemSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub continuation: Option<ContinuationSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub points: Vec<AmbientVector>,
    pub k: usize,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Zero vectors when omitted.
    #[serde(default)]
    pub endpoint_derivatives: Option<EndpointDerivatives>,
}

/// `FlowConfig` without the problem constants; `k`, `lambda`, `sigma` may be repeated but must
/// then agree with the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "interpolation")]
    pub mode: Mode,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub dt: TimeStep,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "imex")]
    pub scheme: Scheme,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            mode: Mode::Interpolation,
            n: default_n(),
            dt: TimeStep::Auto,
            t_max: default_t_max(),
            stop_tol: default_stop_tol(),
            order: DEFAULT_ORDER,
            scheme: Scheme::Imex,
            k: None,
            lambda: None,
            sigma: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    #[default]
    GeodesicPolyline,
    OracleSpline,
    /// A state written by an earlier run (`final_state.json`).
    StateFile(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSection {
    /// Defaults to `0.5, 0.25, 0.125, 0.0625`.
    #[serde(default)]
    pub sigma_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub overrides: Vec<StageOverride>,
    #[serde(default)]
    pub comparison_norms: Option<Vec<ComparisonNorm>>,
    #[serde(default)]
    pub start: StartMode,
    /// Scale each stage's `dt` and `t_max` by `(σ₀/σ_j)²` from the flow section's values.
    #[serde(default)]
    pub diffusive_scaling: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), record_every: default_record_every(), formats: default_formats() }
    }
}

fn one() -> f64 {
    1.0
}
fn interpolation() -> Mode {
    Mode::Interpolation
}
fn default_n() -> usize {
    64
}
fn default_t_max() -> f64 {
    10.0
}
fn default_stop_tol() -> f64 {
    1e-8
}
fn default_order() -> usize {
    DEFAULT_ORDER
}
fn imex() -> Scheme {
    Scheme::Imex
}
fn default_dir() -> String {
    "out".into()
}
fn default_record_every() -> usize {
    10
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| RsfError::InvalidConfig(format!("config: {e}")))
    }

    pub fn problem(&self) -> Result<InterpolationProblem> {
        let m = EmbeddedManifold::parse(&self.manifold)?;
        let p = &self.problem;
        let n = m.ambient_dim();
        let ed = match &p.endpoint_derivatives {
            Some(ed) => ed.clone(),
            None => {
                let zeros = vec![vec![0.0; n]; p.k.saturating_sub(1)];
                EndpointDerivatives { start: zeros.clone(), end: zeros }
            }
        };
        InterpolationProblem::new(m, p.points.clone(), ed, p.k, p.lambda, p.sigma)
    }

    pub fn flow_config(&self, problem: &InterpolationProblem) -> Result<FlowConfig> {
        let f = &self.flow;
        let mismatch = |what: &str| RsfError::InvalidConfig(format!("flow.{what} disagrees with problem.{what}"));
        if f.k.is_some_and(|k| k != problem.k) {
            return Err(mismatch("k"));
        }
        if f.lambda.is_some_and(|l| l != problem.lambda) {
            return Err(mismatch("lambda"));
        }
        if f.sigma.is_some_and(|s| s != problem.sigma) {
            return Err(mismatch("sigma"));
        }
        if self.output.record_every == 0 {
            return Err(RsfError::InvalidConfig("output.record_every must be ≥ 1".into()));
        }
        Ok(FlowConfig {
            mode: f.mode,
            k: problem.k,
            lambda: problem.lambda,
            sigma: problem.sigma,
            n: f.n,
            dt: f.dt,
            t_max: f.t_max,
            stop_tol: f.stop_tol,
            order: f.order,
            scheme: f.scheme,
            record_every: self.output.record_every,
        })
    }

    pub fn init_strategy(&self) -> Result<InitStrategy> {
        Ok(match &self.init {
            InitSpec::GeodesicPolyline => InitStrategy::GeodesicPolyline,
            InitSpec::OracleSpline => InitStrategy::OracleSpline,
            InitSpec::StateFile(path) => {
                let s = std::fs::read_to_string(path)
                    .map_err(|e| RsfError::InvalidConfig(format!("cannot read state file {path}: {e}")))?;
                InitStrategy::UserSupplied(NetworkState::from_json(&s)?)
            }
        })
    }

    /// The continuation plan; the default schedule when the section is absent.
    pub fn plan(&self, base: &FlowConfig) -> Result<ContinuationPlan> {
        let Some(c) = &self.continuation else {
            return Ok(ContinuationPlan::default());
        };
        let mut plan = ContinuationPlan {
            sigma_schedule: c.sigma_schedule.clone().unwrap_or_else(|| ContinuationPlan::default().sigma_schedule),
            overrides: c.overrides.clone(),
            comparison_norms: c.comparison_norms.clone().unwrap_or_else(|| vec![ComparisonNorm::Sup]),
            start: c.start,
        };
        plan.validate()?;
        if c.diffusive_scaling {
            let dt0 = match base.dt {
                TimeStep::Fixed(dt) => dt,
                TimeStep::Auto => {
                    return Err(RsfError::InvalidConfig("continuation.diffusive_scaling needs a numeric flow.dt".into()))
                }
            };
            plan = plan.with_diffusive_scaling(dt0, base.t_max);
        }
        Ok(plan)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"{"manifold":"euclidean:2","problem":{"points":[[0,0],[1,1]],"k":2}}"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_json(MIN).unwrap();
        let p = c.problem().unwrap();
        assert_eq!(p.endpoint_derivatives.start, vec![vec![0.0, 0.0]]);
        let f = c.flow_config(&p).unwrap();
        assert_eq!((f.n, f.scheme, f.record_every), (64, Scheme::Imex, 10));
        assert_eq!(c.init, InitSpec::GeodesicPolyline);
        assert_eq!(c.plan(&f).unwrap(), ContinuationPlan::default());
    }

    #[test]
    fn unknown_keys_rejected_everywhere() {
        for bad in [
            r#"{"manifold":"euclidean:2","problem":{"points":[[0,0],[1,1]],"k":2},"extra":1}"#,
            r#"{"manifold":"euclidean:2","problem":{"points":[[0,0],[1,1]],"k":2,"x":1}}"#,
            r#"{"manifold":"euclidean:2","problem":{"points":[[0,0],[1,1]],"k":2},"flow":{"nn":3}}"#,
            r#"{"manifold":"euclidean:2","problem":{"points":[[0,0],[1,1]],"k":2},"output":{"fmt":[]}}"#,
            r#"{"manifold":"euclidean:2","problem":{"points":[[0,0],[1,1]],"k":2},"continuation":{"sigmas":[]}}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn init_and_formats() {
        let c = RunConfig::from_json(
            r#"{"manifold":"euclidean:1","problem":{"points":[[0],[1]],"k":2},"init":{"state_file":"s.json"},"output":{"formats":["json"]}}"#,
        )
        .unwrap();
        assert_eq!(c.init, InitSpec::StateFile("s.json".into()));
        assert!(c.wants(Format::Json) && !c.wants(Format::Csv));
        let c = RunConfig::from_json(r#"{"manifold":"euclidean:1","problem":{"points":[[0],[1]],"k":2},"init":"oracle_spline"}"#).unwrap();
        assert_eq!(c.init, InitSpec::OracleSpline);
    }

    #[test]
    fn flow_constants_must_agree() {
        let c = RunConfig::from_json(r#"{"manifold":"euclidean:1","problem":{"points":[[0],[1]],"k":2},"flow":{"k":3}}"#).unwrap();
        let p = c.problem().unwrap();
        assert!(c.flow_config(&p).is_err());
    }

    #[test]
    fn continuation_section() {
        let c = RunConfig::from_json(
            r#"{"manifold":"euclidean:1","problem":{"points":[[0],[1],[0]],"k":2,"sigma":0.5},
                "flow":{"mode":"fitting","dt":0.01,"t_max":5},
                "continuation":{"sigma_schedule":[0.5,0.25],"diffusive_scaling":true}}"#,
        )
        .unwrap();
        let p = c.problem().unwrap();
        let f = c.flow_config(&p).unwrap();
        let plan = c.plan(&f).unwrap();
        assert_eq!(plan.stage_config(&f, 1).t_max, 20.0);
        let empty = RunConfig::from_json(
            r#"{"manifold":"euclidean:1","problem":{"points":[[0],[1],[0]],"k":2},"continuation":{"sigma_schedule":[]}}"#,
        )
        .unwrap();
        assert!(empty.plan(&f).is_err());
    }
}
