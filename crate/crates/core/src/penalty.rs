//! σ-continuation: run the fitting flow for a decreasing sequence of penalty parameters and
//! track how the stages approach the exact interpolation problem.
//!
//! Stages either warm start from the previous stage's final network or all restart from the
//! same datum; cold stages are independent and fan out over `RSF_THREADS` worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::calculus::{partial_at, StencilSet};
use crate::error::{Result, RsfError};
use crate::flow::{Flow, FlowConfig, Scheme, StopReason, TimeStep};
use crate::netstate::{ArcGrid, InterpolationProblem, Mode, NetworkState};
use crate::oracle::euclidean_spline;
use crate::vecops::dist;

pub const THREADS_ENV: &str = "RSF_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// Each stage starts from the previous stage's final state.
    #[default]
    Warm,
    /// Every stage starts from the same datum.
    Cold,
}

/// Discrete norm used to compare consecutive stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparisonNorm {
    /// `max |a − b|` over nodes.
    Sup,
    /// `max_{μ ≤ 1} max |∂^μ(a − b)|`.
    C1,
    /// `max_{μ ≤ 2} max |∂^μ(a − b)|`.
    C2,
}

impl ComparisonNorm {
    fn order(self) -> usize {
        match self {
            ComparisonNorm::Sup => 0,
            ComparisonNorm::C1 => 1,
            ComparisonNorm::C2 => 2,
        }
    }
}

/// Per-stage changes to the base [`FlowConfig`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOverride {
    /// 0-based stage index.
    pub stage: usize,
    #[serde(default)]
    pub dt: Option<TimeStep>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default)]
    pub scheme: Option<Scheme>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationPlan {
    pub sigma_schedule: Vec<f64>,
    #[serde(default)]
    pub overrides: Vec<StageOverride>,
    #[serde(default = "default_norms")]
    pub comparison_norms: Vec<ComparisonNorm>,
    #[serde(default)]
    pub start: StartMode,
}

fn default_norms() -> Vec<ComparisonNorm> {
    vec![ComparisonNorm::Sup]
}

impl Default for ContinuationPlan {
    fn default() -> Self {
        // σ = 0.5, 0.25, 0.125, 0.0625
        Self::geometric(0.5, 0.5, 4).expect("default schedule is valid")
    }
}

impl ContinuationPlan {
    /// `σ_j = σ₀·r^j`, `j = 0..J−1`.
    pub fn geometric(sigma0: f64, ratio: f64, stages: usize) -> Result<Self> {
        let plan = Self {
            sigma_schedule: (0..stages).map(|j| sigma0 * ratio.powi(j as i32)).collect(),
            overrides: Vec::new(),
            comparison_norms: default_norms(),
            start: StartMode::Warm,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(RsfError::InvalidConfig(s));
        if self.sigma_schedule.is_empty() {
            return bad("empty σ schedule".into());
        }
        if let Some(s) = self.sigma_schedule.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return bad(format!("σ = {s} outside (0, 1)"));
        }
        if self.sigma_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("σ schedule must be strictly decreasing".into());
        }
        if let Some(o) = self.overrides.iter().find(|o| o.stage >= self.sigma_schedule.len()) {
            return bad(format!("override for stage {} of {}", o.stage, self.sigma_schedule.len()));
        }
        if self.comparison_norms.is_empty() {
            return bad("no comparison norms".into());
        }
        Ok(())
    }

    /// Overrides `dt_j = dt₀·(σ₀/σ_j)²`, `t_max,j = t_max₀·(σ₀/σ_j)²`: the χ heat flow relaxes on
    /// the time scale `σ⁻²`, so every stage then needs about the same number of steps.
    pub fn with_diffusive_scaling(mut self, dt0: f64, t_max0: f64) -> Self {
        let s0 = self.sigma_schedule[0];
        self.overrides = self
            .sigma_schedule
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let f = (s0 / s).powi(2);
                StageOverride { stage: j, dt: Some(TimeStep::Fixed(dt0 * f)), t_max: Some(t_max0 * f), ..StageOverride::default() }
            })
            .collect();
        self
    }

    /// Flow configuration of stage `j`.
    pub fn stage_config(&self, base: &FlowConfig, j: usize) -> FlowConfig {
        let mut c = base.clone();
        c.sigma = self.sigma_schedule[j];
        for o in self.overrides.iter().filter(|o| o.stage == j) {
            if let Some(dt) = o.dt {
                c.dt = dt;
            }
            if let Some(t) = o.t_max {
                c.t_max = t;
            }
            if let Some(s) = o.stop_tol {
                c.stop_tol = s;
            }
            if let Some(s) = o.scheme {
                c.scheme = s;
            }
        }
        c
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageResult {
    pub sigma: f64,
    pub stop_reason: StopReason,
    pub steps: usize,
    /// Energy of the raw datum (χ ≡ p) at this σ: σ-independent.
    pub e_datum: f64,
    /// Energy of the datum after the boundary projection: the `E(0)` of the penalty bound.
    pub e0: f64,
    /// Energy of this stage's (projected) starting state; equals `e0` for cold starts.
    pub e_start: f64,
    #[serde(rename = "E_final")]
    pub e_final: f64,
    /// Largest `E_{i+1} − E_i` over consecutive recorded states.
    pub max_energy_increase: f64,
    /// `max_l |γ(x_l) − p_l|` over interior knots.
    pub interp_error: f64,
    /// `max |χ_l − p_l|` over nodes and recorded times.
    pub max_chi_deviation: f64,
    /// `max |χ_l − p_l|` of the final state.
    pub final_chi_deviation: f64,
    /// `σ²√(2E(0))`.
    pub penalty_bound: f64,
    /// The bound concerns the flow from `χ ≡ p`: checked over the whole trajectory for cold
    /// starts, on the final state for warm starts (whose trajectory begins at the previous
    /// stage's χ).
    pub penalty_bound_ok: bool,
    /// Sup distance to the Euclidean oracle spline, when one exists.
    pub oracle_error: Option<f64>,
    #[serde(skip)]
    pub final_state: Option<NetworkState>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CauchyEntry {
    pub from_sigma: f64,
    pub to_sigma: f64,
    pub norm: ComparisonNorm,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub start: StartMode,
    pub stages: Vec<StageResult>,
    /// Distances between consecutive final γ, per comparison norm.
    pub cauchy: Vec<CauchyEntry>,
    /// Sup-norm distances `d_j` strictly decreasing for `j ≥ 1`.
    pub cauchy_decreasing: bool,
    pub interp_error_decreasing: bool,
    /// Indices of stages that ran out of time.
    pub nonconvergent_stages: Vec<usize>,
    /// Consecutive stages failed to contract: reported instead of picking a limit.
    pub divergence: bool,
}

impl ContinuationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Err on the first stage that hit its time budget.
    pub fn require_converged(&self) -> Result<()> {
        match self.nonconvergent_stages.first() {
            Some(&j) => Err(RsfError::NonconvergentStage { stage: j, sigma: self.stages[j].sigma }),
            None => Ok(()),
        }
    }

    /// Last-stage γ, the surrogate for the σ → 0 limit.
    pub fn limit(&self) -> Option<&NetworkState> {
        self.stages.last().and_then(|s| s.final_state.as_ref())
    }
}

/// True iff `max |χ_l − p_l| ≤ σ²√(2E0)`, per χ arc.
pub fn penalty_bound_check(problem: &InterpolationProblem, state: &NetworkState, sigma: f64, e0: f64) -> Vec<bool> {
    let bound = sigma * sigma * (2.0 * e0).sqrt();
    state.chi_arcs.iter().zip(&problem.points[1..]).map(|(arc, p)| chi_deviation(arc, p) <= bound).collect()
}

fn chi_deviation(arc: &ArcGrid, p: &[f64]) -> f64 {
    arc.samples.iter().map(|x| dist(x, p)).fold(0.0, f64::max)
}

fn max_chi_deviation(problem: &InterpolationProblem, state: &NetworkState) -> f64 {
    state.chi_arcs.iter().zip(&problem.points[1..]).map(|(a, p)| chi_deviation(a, p)).fold(0.0, f64::max)
}

/// `max_l |γ(x_l) − p_l|` over the interior knots.
pub fn interpolation_error(problem: &InterpolationProblem, state: &NetworkState) -> f64 {
    state.gamma_arcs.iter().skip(1).zip(&problem.points[1..]).map(|(a, p)| dist(a.first(), p)).fold(0.0, f64::max)
}

/// `max_{μ ≤ order} max_{l, j} |∂^μ(a_l − b_l)(x_j)|`.
pub fn discrete_distance(st: &StencilSet, a: &[ArcGrid], b: &[ArcGrid], order: usize) -> f64 {
    let mut d: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff: Vec<Vec<f64>> = x.samples.iter().zip(&y.samples).map(|(p, q)| p.iter().zip(q).map(|(u, v)| u - v).collect()).collect();
        for mu in 0..=order {
            for j in 0..diff.len() {
                let v = if mu == 0 { diff[j].clone() } else { partial_at(st, &diff, mu, j) };
                d = d.max(v.iter().fold(0.0, |m, c| m.max(c.abs())));
            }
        }
    }
    d
}

/// Worker count from `RSF_THREADS` (default 1).
pub fn thread_count() -> Result<usize> {
    parse_threads(std::env::var(THREADS_ENV).ok().as_deref())
}

fn parse_threads(v: Option<&str>) -> Result<usize> {
    match v {
        None => Ok(1),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(RsfError::InvalidConfig(format!("{THREADS_ENV} must be an integer ≥ 1, got {s:?}"))),
        },
    }
}

fn run_stage(problem: &InterpolationProblem, datum: &NetworkState, start: &NetworkState, config: &FlowConfig) -> Result<StageResult> {
    let sigma = config.sigma;
    let problem = problem.with_sigma(sigma);
    let flow = Flow::new(&problem, config)?;
    let e_datum = flow.energy(datum).total;
    let e0 = flow.energy(&flow.project_onto_constraints(datum)?).total;
    let mut dev: f64 = 0.0;
    let out = flow.run_observed(start, |s, _| dev = dev.max(max_chi_deviation(&problem, s)))?;
    let penalty_bound = sigma * sigma * (2.0 * e0).sqrt();
    let final_dev = max_chi_deviation(&problem, &out.state);
    let cold = std::ptr::eq(datum, start) || start.chi_arcs == datum.chi_arcs;
    let oracle_error = if problem.manifold.is_euclidean() && problem.lambda == 0.0 {
        let o = euclidean_spline(&problem)?.sample(config.n);
        Some(out.state.gamma_arcs.iter().zip(&o).flat_map(|(a, b)| a.samples.iter().zip(&b.samples).map(|(x, y)| dist(x, y))).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(StageResult {
        sigma,
        stop_reason: out.stop,
        steps: out.steps,
        e_datum,
        e0,
        e_start: out.initial_energy,
        e_final: out.records.last().map_or(out.initial_energy, |r| r.energy.total),
        max_energy_increase: out.records.windows(2).map(|w| w[1].energy.total - w[0].energy.total).reduce(f64::max).unwrap_or(0.0),
        interp_error: interpolation_error(&problem, &out.state),
        max_chi_deviation: dev,
        final_chi_deviation: final_dev,
        penalty_bound,
        penalty_bound_ok: if cold { dev } else { final_dev } <= penalty_bound,
        oracle_error,
        final_state: Some(out.state),
    })
}

/// Run the fitting flow for every σ of `plan`, starting from `initial` (χ_l ≡ p_l).
pub fn run_continuation(
    problem: &InterpolationProblem,
    initial: &NetworkState,
    base: &FlowConfig,
    plan: &ContinuationPlan,
) -> Result<ContinuationReport> {
    plan.validate()?;
    if base.mode != Mode::Fitting {
        return Err(RsfError::InvalidConfig("continuation runs the fitting flow".into()));
    }
    let tol = problem.manifold.tolerance();
    for (l, arc) in initial.chi_arcs.iter().enumerate() {
        if chi_deviation(arc, &problem.points[l + 1]) > tol {
            return Err(RsfError::InvalidConfig(format!("initial χ_{} is not the constant map p_{}", l + 1, l + 1)));
        }
    }
    let j_max = plan.sigma_schedule.len();
    let stages: Vec<StageResult> = match plan.start {
        StartMode::Warm => {
            let mut out: Vec<StageResult> = Vec::with_capacity(j_max);
            for j in 0..j_max {
                let start = out.last().and_then(|s| s.final_state.clone()).unwrap_or_else(|| initial.clone());
                let mut start = start;
                start.t = 0.0;
                out.push(run_stage(problem, initial, &start, &plan.stage_config(base, j))?);
            }
            out
        }
        StartMode::Cold => {
            let threads = thread_count()?.min(j_max);
            let next = AtomicUsize::new(0);
            let slots: Mutex<Vec<Option<Result<StageResult>>>> = Mutex::new(vec![None; j_max]);
            std::thread::scope(|s| {
                for _ in 0..threads {
                    s.spawn(|| loop {
                        let j = next.fetch_add(1, Ordering::Relaxed);
                        if j >= j_max {
                            break;
                        }
                        let r = run_stage(problem, initial, initial, &plan.stage_config(base, j));
                        slots.lock().expect("no worker panicked")[j] = Some(r);
                    });
                }
            });
            slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every stage ran")).collect::<Result<_>>()?
        }
    };
    let st = StencilSet::new(base.n, 2, base.order)?;
    let mut cauchy = Vec::new();
    let mut sup = Vec::new();
    for w in stages.windows(2) {
        let (a, b) = (w[0].final_state.as_ref().unwrap(), w[1].final_state.as_ref().unwrap());
        for &norm in &plan.comparison_norms {
            let d = discrete_distance(&st, &a.gamma_arcs, &b.gamma_arcs, norm.order());
            cauchy.push(CauchyEntry { from_sigma: w[0].sigma, to_sigma: w[1].sigma, norm, distance: d });
        }
        sup.push(discrete_distance(&st, &a.gamma_arcs, &b.gamma_arcs, 0));
    }
    // d_j = ‖γ^{σ_j} − γ^{σ_{j+1}}‖: the first pair is exempt (d_{j+1} < d_j for j ≥ 1)
    let cauchy_decreasing = sup.iter().skip(1).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0]);
    let interp_error_decreasing = stages.windows(2).all(|w| w[1].interp_error <= w[0].interp_error);
    let nonconvergent_stages = stages.iter().enumerate().filter(|(_, s)| s.stop_reason == StopReason::TimeBudget).map(|(j, _)| j).collect();
    Ok(ContinuationReport {
        start: plan.start,
        stages,
        cauchy,
        cauchy_decreasing,
        interp_error_decreasing,
        nonconvergent_stages,
        divergence: !cauchy_decreasing,
    })
}
