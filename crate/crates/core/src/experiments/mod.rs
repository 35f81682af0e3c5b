//! Scenario orchestration: validation, ε-sweep convergence studies,
//! estimator cross-checks, suboptimality ratios, and CSV/JSON/plot-data
//! emission.

pub mod presets;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    check_homogeneity, derive_exponents, eval_cost, homogeneity_samples, renormalize,
    CostBreakdown, CostSpec,
};
use crate::stationary::{
    closed_form_limit, integrate_limit_over_time, LimitCostEstimate, LimitEstimator,
    SimLimitOptions,
};
use crate::strategies::{
    check_admissibility_impulse, check_admissibility_singular, check_lyapunov_regular, run_impulse,
    run_regular, run_singular, ControlledPath, SimOptions, StrategySpec,
};
use crate::{closed_form, mix_seed, Error, Result, TargetModel};

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

/// Which estimator backs the theoretical limit of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Closed form when the scenario is in the explicit catalog, otherwise
    /// the chain oracle (d ≤ 2), otherwise long-run simulation.
    #[default]
    Auto,
    Oracle,
    Simulation,
    ClosedForm,
    /// Oracle cross-checked against simulation (consistency alarm on
    /// disagreement).
    Cross,
}

/// Numerical options of a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Substeps per intrinsic time unit ε^{2β}.
    pub n_sub: usize,
    /// 1D Brownian-bridge hitting correction for impulse runs.
    pub bridge_correction: bool,
    /// Burn-in fraction for occupation estimates.
    pub burn_in: f64,
    /// Chain-oracle grid intervals across the domain.
    pub oracle_bins: usize,
    /// Boundary bins for occupation measures.
    pub boundary_bins: usize,
    /// Interior histogram bins for empirical occupation.
    pub occupation_bins: usize,
    /// Unit-scale horizon of the simulation limit estimator.
    pub unit_horizon: f64,
    /// Replications of the simulation limit estimator.
    pub sim_reps: usize,
    /// Trapezoid nodes for time-varying limit integration.
    pub limit_time_points: usize,
    pub limit_estimator: EstimatorKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            n_sub: 100,
            bridge_correction: false,
            burn_in: 0.1,
            oracle_bins: 400,
            boundary_bins: 32,
            occupation_bins: 200,
            unit_horizon: 1e4,
            sim_reps: 8,
            limit_time_points: 33,
            limit_estimator: EstimatorKind::Auto,
        }
    }
}

/// A complete experiment description, serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub target: TargetModel,
    pub cost: CostSpec,
    pub beta: f64,
    pub strategy: StrategySpec,
    pub horizon: f64,
    pub epsilon_list: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            n_sub: self.solver.n_sub,
            bridge_correction: self.solver.bridge_correction,
            ..SimOptions::default()
        }
    }

    fn sim_limit_options(&self) -> SimLimitOptions {
        SimLimitOptions {
            reps: self.solver.sim_reps,
            horizon: self.solver.unit_horizon,
            n_sub: self.solver.n_sub,
            burn_in: self.solver.burn_in,
            base_seed: mix_seed(self.base_seed, 0x11f1, 0),
            bins: self.solver.occupation_bins,
            boundary_bins: self.solver.boundary_bins,
        }
    }

    /// Resolves the limit estimator, probing the closed-form catalog for
    /// `Auto`.
    pub fn limit_estimator(&self) -> LimitEstimator {
        match self.solver.limit_estimator {
            EstimatorKind::Oracle => LimitEstimator::Oracle {
                bins: self.solver.oracle_bins,
            },
            EstimatorKind::Simulation => LimitEstimator::Simulation(self.sim_limit_options()),
            EstimatorKind::ClosedForm => LimitEstimator::ClosedForm,
            EstimatorKind::Cross => LimitEstimator::Cross {
                bins: self.solver.oracle_bins,
                sim: self.sim_limit_options(),
            },
            EstimatorKind::Auto => {
                let a0 = self.target.diffusion.eval(0.0, 0.0);
                if closed_form_limit(&a0, &self.strategy, &self.cost, 0.0).is_ok() {
                    LimitEstimator::ClosedForm
                } else if self.target.dim <= 2 {
                    LimitEstimator::Oracle {
                        bins: self.solver.oracle_bins,
                    }
                } else {
                    LimitEstimator::Simulation(self.sim_limit_options())
                }
            }
        }
    }
}

/// Runs one replication of the scenario's strategy at the given ε.
pub fn run_strategy(scenario: &Scenario, eps: f64, seed: u64) -> Result<ControlledPath> {
    let scaling = derive_exponents(scenario.beta, &scenario.cost)?;
    let opts = scenario.sim_options();
    match &scenario.strategy {
        StrategySpec::Impulse(t) => run_impulse(
            t,
            &scenario.target,
            &scaling,
            eps,
            scenario.horizon,
            seed,
            &opts,
        ),
        StrategySpec::Singular(t) => run_singular(
            t,
            &scenario.target,
            &scaling,
            eps,
            scenario.horizon,
            seed,
            &opts,
        ),
        StrategySpec::Regular(p) => run_regular(
            p,
            &scenario.target,
            &scaling,
            eps,
            scenario.horizon,
            seed,
            &opts,
        ),
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Aggregates the admissibility checks, homogeneity check and exponent
/// consistency for a scenario.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(CheckResult {
            name: name.to_string(),
            pass,
            detail,
        });
    };

    let eps_ok = !scenario.epsilon_list.is_empty()
        && scenario.epsilon_list.iter().all(|&e| e > 0.0 && e <= 1.0)
        && scenario.epsilon_list.windows(2).all(|w| w[1] < w[0]);
    push(
        "epsilon_list",
        eps_ok,
        format!(
            "{:?} (must be strictly decreasing in (0,1])",
            scenario.epsilon_list
        ),
    );
    push(
        "replications",
        scenario.replications >= 1,
        format!("{}", scenario.replications),
    );
    match scenario.target.validate() {
        Ok(()) => push("target_model", true, "coefficients valid".into()),
        Err(e) => push("target_model", false, e.to_string()),
    }
    match scenario.cost.validate(scenario.horizon) {
        Ok(()) => push("cost_degrees", true, "degree constraints hold".into()),
        Err(e) => push("cost_degrees", false, e.to_string()),
    }
    match derive_exponents(scenario.beta, &scenario.cost) {
        Ok(s) => push(
            "exponents",
            true,
            format!(
                "beta={} beta_q={} beta_f={} beta_p={}",
                s.beta,
                s.beta_q(),
                s.beta_f(),
                s.beta_p()
            ),
        ),
        Err(e) => push("exponents", false, e.to_string()),
    }
    let hom = check_homogeneity(&scenario.cost, &homogeneity_samples(scenario.target.dim));
    push(
        "homogeneity",
        hom < 1e-8,
        format!("max relative defect {hom:.3e} (tolerance 1e-8)"),
    );
    if let Some(dom) = scenario.strategy.domain() {
        push(
            "dimension",
            dom.dim() == scenario.target.dim,
            format!("domain d={} vs target d={}", dom.dim(), scenario.target.dim),
        );
    }
    let cost_dims_ok = [
        &scenario.cost.deviation,
        &scenario.cost.regular,
        &scenario.cost.fixed,
        &scenario.cost.proportional,
    ]
    .iter()
    .all(|f| f.dim().is_none_or(|d| d == scenario.target.dim));
    push(
        "cost_dimensions",
        cost_dims_ok,
        format!("cost functions defined on d={}", scenario.target.dim),
    );
    let a0 = scenario.target.diffusion.eval(0.0, 0.0);
    match &scenario.strategy {
        StrategySpec::Impulse(t) => {
            let rep = check_admissibility_impulse(t, scenario.horizon, 64);
            push(
                "potential_jump",
                rep.pass,
                format!(
                    "min decrement {:.6} over {} samples",
                    rep.worst, rep.n_samples
                ),
            );
        }
        StrategySpec::Singular(t) => {
            let rep = check_admissibility_singular(t, scenario.horizon, 64);
            push(
                "potential_reflect",
                rep.pass,
                format!(
                    "max <gradV,gamma> {:.6} over {} samples",
                    rep.worst, rep.n_samples
                ),
            );
        }
        StrategySpec::Regular(p) => {
            push(
                "lyapunov_constants",
                p.theta > 0.0 && p.big_theta > 0.0,
                format!("theta = {}, Theta = {}", p.theta, p.big_theta),
            );
            let radius = 4.0 * (1.0 + a0.trace().sqrt());
            let rep = check_lyapunov_regular(p, &a0, 101, radius);
            push(
                "lyapunov",
                rep.pass,
                format!(
                    "max surplus {:.6} over {} samples",
                    rep.worst, rep.n_samples
                ),
            );
        }
    }
    ValidationReport { checks }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Per-ε aggregate of renormalized costs over the replications.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub replications: usize,
    pub mean: CostBreakdown,
    pub se: CostBreakdown,
    pub mean_total: f64,
    pub se_total: f64,
    /// Scaled jump rate `N^ε_T · ε^{2β} / T` (impulse strategies).
    pub jump_rate: Option<f64>,
}

/// Full sweep output.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub scenario: String,
    pub rows: Vec<SweepRow>,
    /// `∫_0^T c(...) dt` via the scenario's limit estimator; absent when no
    /// estimator applies (e.g. random factor-driven coefficients).
    pub limit: Option<LimitCostEstimate>,
    /// Closed-form limit when the scenario is in the explicit catalog.
    pub closed_form: Option<LimitCostEstimate>,
    /// Closed-form lower bound `∫ I dt` when available.
    pub lower_bound: Option<f64>,
    /// `limit.total / lower_bound`.
    pub suboptimality_ratio: Option<f64>,
}

/// Runs the ε-sweep: per ε and replication, simulates the strategy,
/// evaluates and renormalizes the cost per term, and aggregates means and
/// standard errors; then computes the theoretical limit.
pub fn run_sweep(scenario: &Scenario) -> Result<SweepResult> {
    let report = validate_scenario(scenario);
    if !report.pass() {
        return Err(Error::ValidationFailed(report.to_string()));
    }
    let scaling = derive_exponents(scenario.beta, &scenario.cost)?;

    let mut rows = Vec::with_capacity(scenario.epsilon_list.len());
    for (ei, &eps) in scenario.epsilon_list.iter().enumerate() {
        let per_rep: Result<Vec<(CostBreakdown, f64)>> = (0..scenario.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = mix_seed(scenario.base_seed, ei as u64, rep as u64);
                let path = run_strategy(scenario, eps, seed)?;
                let raw = eval_cost(&path, &scenario.cost, &scaling, eps)?;
                let renorm = renormalize(&raw, eps, &scaling)?;
                let rate = path.jumps.len() as f64 * scaling.time_scale(eps) / scenario.horizon;
                Ok((renorm, rate))
            })
            .collect();
        let per_rep = per_rep?;
        let n = per_rep.len() as f64;
        let mut mean = CostBreakdown::default();
        let mut mean_rate = 0.0;
        for (b, rate) in &per_rep {
            mean.deviation_term += b.deviation_term / n;
            mean.regular_term += b.regular_term / n;
            mean.fixed_term += b.fixed_term / n;
            mean.proportional_term += b.proportional_term / n;
            mean_rate += rate / n;
        }
        let mut var = CostBreakdown::default();
        let mut var_total = 0.0;
        for (b, _) in &per_rep {
            var.deviation_term += (b.deviation_term - mean.deviation_term).powi(2);
            var.regular_term += (b.regular_term - mean.regular_term).powi(2);
            var.fixed_term += (b.fixed_term - mean.fixed_term).powi(2);
            var.proportional_term += (b.proportional_term - mean.proportional_term).powi(2);
            var_total += (b.total() - mean.total()).powi(2);
        }
        let denom = (n - 1.0).max(1.0) * n;
        let se = CostBreakdown {
            deviation_term: (var.deviation_term / denom).sqrt(),
            regular_term: (var.regular_term / denom).sqrt(),
            fixed_term: (var.fixed_term / denom).sqrt(),
            proportional_term: (var.proportional_term / denom).sqrt(),
        };
        rows.push(SweepRow {
            eps,
            replications: per_rep.len(),
            mean_total: mean.total(),
            se_total: (var_total / denom).sqrt(),
            mean,
            se,
            jump_rate: if matches!(scenario.strategy, StrategySpec::Impulse(_)) {
                Some(mean_rate)
            } else {
                None
            },
        });
    }

    let estimator = scenario.limit_estimator();
    // random (factor-driven) coefficients have a pathwise-random limit, so
    // the limit fields stay empty for them; a genuine estimator alarm still
    // aborts the sweep
    let limit = match integrate_limit_over_time(
        &scenario.target,
        &scenario.strategy,
        &scenario.cost,
        scenario.horizon,
        scenario.solver.limit_time_points,
        &estimator,
    ) {
        Ok(c) => Some(c),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let closed_form = integrate_limit_over_time(
        &scenario.target,
        &scenario.strategy,
        &scenario.cost,
        scenario.horizon,
        scenario.solver.limit_time_points,
        &LimitEstimator::ClosedForm,
    )
    .ok();
    let lower_bound = lower_bound_integrated(scenario).ok();
    let suboptimality_ratio = match (&limit, lower_bound) {
        (Some(c), Some(i)) => Some(c.total / i),
        _ => None,
    };

    Ok(SweepResult {
        scenario: scenario.name.clone(),
        rows,
        limit,
        closed_form,
        lower_bound,
        suboptimality_ratio,
    })
}

/// `∫_0^T I(a_t, weights_t) dt` for the families with explicit lower
/// bounds: quadratic-deviation impulse (`I = Tr(aB)·√(rk·F)`, counting F)
/// and the LQ regular family (`I = Tr(aG)`).
pub fn lower_bound_integrated(scenario: &Scenario) -> Result<f64> {
    let model = &scenario.target;
    if matches!(
        model.diffusion,
        crate::sde::DiffusionSpec::FactorScaled { .. }
    ) {
        return Err(Error::Unsupported(
            "lower bound needs deterministic coefficients".into(),
        ));
    }
    let pointwise = |t: f64| -> Result<f64> {
        let a = model.diffusion.eval(t, 0.0);
        lower_bound_pointwise(&a, &scenario.strategy, &scenario.cost, t)
    };
    let constant = model.is_time_invariant()
        && scenario.cost.r.is_constant()
        && scenario.cost.l.is_constant()
        && scenario.cost.k.is_constant()
        && scenario.cost.h.is_constant();
    if constant {
        return Ok(pointwise(0.0)? * scenario.horizon);
    }
    let n = scenario.solver.limit_time_points.max(2);
    let dt = scenario.horizon / (n - 1) as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 * dt } else { dt };
        acc += w * pointwise(i as f64 * dt)?;
    }
    Ok(acc)
}

/// Pointwise lower bound `I(a_t, ...)` for the two explicit families.
pub fn lower_bound_pointwise(
    a: &nalgebra::DMatrix<f64>,
    strategy: &StrategySpec,
    cost: &CostSpec,
    t: f64,
) -> Result<f64> {
    use crate::cost::CostFn;
    match strategy {
        StrategySpec::Impulse(_) => {
            let sd = match &cost.deviation {
                CostFn::Quadratic { matrix } => matrix.0.clone(),
                _ => {
                    return Err(Error::Unsupported(
                        "impulse lower bound needs quadratic deviation cost".into(),
                    ))
                }
            };
            let f0 = match &cost.fixed {
                CostFn::Counting { weights } => {
                    // F is constant on jumps that move every coordinate
                    weights.iter().sum::<f64>()
                }
                _ => {
                    return Err(Error::Unsupported(
                        "impulse lower bound needs a counting fixed cost".into(),
                    ))
                }
            };
            let lb = closed_form::impulse_lower_bound(a, &sd, cost.r.eval(t), cost.k.eval(t) * f0)?;
            Ok(lb.i_value)
        }
        StrategySpec::Regular(_) => {
            let (sd, sq) = match (&cost.deviation, &cost.regular) {
                (CostFn::Quadratic { matrix: d }, CostFn::Quadratic { matrix: q }) => {
                    (d.0.clone(), q.0.clone())
                }
                _ => {
                    return Err(Error::Unsupported(
                        "LQ lower bound needs quadratic D and Q".into(),
                    ))
                }
            };
            let sol = closed_form::solve_lq(a, &sd, &sq, cost.r.eval(t), cost.l.eval(t))?;
            Ok(sol.i_value)
        }
        StrategySpec::Singular(_) => Err(Error::Unsupported(
            "no closed-form lower bound for the singular family".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Suboptimality report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SuboptimalityReport {
    pub scenario: String,
    /// Integrated limit cost of the strategy.
    pub strategy_cost: f64,
    /// Integrated closed-form lower bound.
    pub lower_bound: f64,
    pub ratio: f64,
}

/// Ratio of the strategy's limit cost to the closed-form lower bound;
/// ≥ 1 up to estimator tolerance, = 1 for asymptotically optimal strategies.
pub fn suboptimality_report(scenario: &Scenario) -> Result<SuboptimalityReport> {
    let estimator = scenario.limit_estimator();
    let limit = integrate_limit_over_time(
        &scenario.target,
        &scenario.strategy,
        &scenario.cost,
        scenario.horizon,
        scenario.solver.limit_time_points,
        &estimator,
    )?;
    let lower = lower_bound_integrated(scenario)?;
    Ok(SuboptimalityReport {
        scenario: scenario.name.clone(),
        strategy_cost: limit.total,
        lower_bound: lower,
        ratio: limit.total / lower,
    })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

impl SweepResult {
    /// One CSV row per ε with every aggregate statistic.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "eps",
            "replications",
            "mean_total",
            "se_total",
            "mean_deviation",
            "se_deviation",
            "mean_regular",
            "se_regular",
            "mean_fixed",
            "se_fixed",
            "mean_proportional",
            "se_proportional",
            "jump_rate",
            "limit_total",
            "closed_form_total",
            "lower_bound",
            "suboptimality_ratio",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                format!("{}", r.eps),
                format!("{}", r.replications),
                format!("{}", r.mean_total),
                format!("{}", r.se_total),
                format!("{}", r.mean.deviation_term),
                format!("{}", r.se.deviation_term),
                format!("{}", r.mean.regular_term),
                format!("{}", r.se.regular_term),
                format!("{}", r.mean.fixed_term),
                format!("{}", r.se.fixed_term),
                format!("{}", r.mean.proportional_term),
                format!("{}", r.se.proportional_term),
                r.jump_rate.map_or(String::new(), |v| format!("{v}")),
                self.limit.map_or(String::new(), |c| format!("{}", c.total)),
                self.closed_form
                    .map_or(String::new(), |c| format!("{}", c.total)),
                self.lower_bound.map_or(String::new(), |v| format!("{v}")),
                self.suboptimality_ratio
                    .map_or(String::new(), |v| format!("{v}")),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two whitespace-separated columns: log10(ε) and mean renormalized
    /// total cost, one line per ε.
    pub fn write_plot_data<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rows {
            writeln!(w, "{} {}", r.eps.log10(), r.mean_total)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
