use super::presets;
use super::*;
use crate::cost::CostFn;
use crate::linalg::SymMat;
use crate::sde::ScalarFn;
use approx::assert_relative_eq;

fn tiny(mut sc: Scenario) -> Scenario {
    sc.replications = 8;
    sc.epsilon_list = vec![0.4, 0.2];
    sc
}

#[test]
fn validate_optimal_scenarios_pass() {
    for sc in [
        presets::impulse_optimal_1d(),
        presets::singular_optimal_1d(),
        presets::regular_lq_1d(),
        presets::impulse_ellipsoid_2d().unwrap(),
    ] {
        let rep = validate_scenario(&sc);
        assert!(rep.pass(), "{}:\n{rep}", sc.name);
    }
}

#[test]
fn validate_rejects_null_jump() {
    let mut sc = presets::impulse_optimal_1d();
    if let StrategySpec::Impulse(t) = &mut sc.strategy {
        t.jump = crate::strategies::JumpRule::Proportional {
            alpha: ScalarFn::constant(0.0),
        };
    }
    let rep = validate_scenario(&sc);
    assert!(!rep.pass());
    let jump_check = rep
        .checks
        .iter()
        .find(|c| c.name == "potential_jump")
        .unwrap();
    assert!(
        !jump_check.pass,
        "zero jump must fail the potential check: {rep}"
    );
}

#[test]
fn validate_rejects_wrong_degree() {
    let mut sc = presets::impulse_optimal_1d();
    sc.cost.deviation = CostFn::ShiftedQuadratic {
        matrix: SymMat::scalar(1.0),
        shift: 1.0,
    };
    let rep = validate_scenario(&sc);
    let hom = rep.checks.iter().find(|c| c.name == "homogeneity").unwrap();
    assert!(!hom.pass, "{rep}");
}

#[test]
fn validate_rejects_cost_dimension_mismatch() {
    let mut sc = presets::impulse_optimal_1d();
    sc.cost.fixed = CostFn::Counting {
        weights: vec![1.0, 1.0],
    };
    let rep = validate_scenario(&sc);
    let check = rep
        .checks
        .iter()
        .find(|c| c.name == "cost_dimensions")
        .unwrap();
    assert!(!check.pass, "{rep}");
}

#[test]
fn validate_rejects_increasing_epsilon() {
    let mut sc = presets::impulse_optimal_1d();
    sc.epsilon_list = vec![0.1, 0.2];
    assert!(!validate_scenario(&sc).pass());
    sc.epsilon_list = vec![1.5];
    assert!(!validate_scenario(&sc).pass());
}

#[test]
fn sweep_degenerate_target_costs_zero() {
    let mut sc = tiny(presets::impulse_optimal_1d());
    sc.target = crate::TargetModel::scalar(0.0, 0.0).unwrap();
    sc.solver.limit_estimator = EstimatorKind::ClosedForm;
    sc.solver.bridge_correction = false;
    let out = run_sweep(&sc).unwrap();
    for row in &out.rows {
        assert_eq!(row.mean_total, 0.0, "eps {}", row.eps);
    }
    assert_eq!(out.limit.unwrap().total, 0.0);
}

#[test]
fn sweep_rows_follow_epsilon_list() {
    let sc = tiny(presets::regular_lq_1d());
    let out = run_sweep(&sc).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.rows[0].eps, 0.4);
    assert_eq!(out.rows[1].eps, 0.2);
    assert!(out.rows.iter().all(|r| r.replications == 8));
    assert!(out.rows.iter().all(|r| r.se_total > 0.0));
    assert!(out.limit.unwrap().total > 0.0);
}

#[test]
fn sweep_is_bit_deterministic() {
    let sc = tiny(presets::impulse_optimal_1d());
    let a = run_sweep(&sc).unwrap();
    let b = run_sweep(&sc).unwrap();
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    let mut plot = Vec::new();
    a.write_plot_data(&mut plot).unwrap();
    assert_eq!(String::from_utf8(plot).unwrap().lines().count(), 2);
}

#[test]
fn suboptimality_optimal_is_one() {
    let sc = presets::impulse_optimal_1d();
    let rep = suboptimality_report(&sc).unwrap();
    assert_relative_eq!(rep.ratio, 1.0, epsilon = 1e-9);
    let sc = presets::regular_lq_1d();
    let rep = suboptimality_report(&sc).unwrap();
    assert_relative_eq!(rep.ratio, 1.0, epsilon = 1e-9);
}

#[test]
fn suboptimality_doubled_domain() {
    // c(L) = rL²/6 + k·a/L² at L = 2·6^{1/4}, I = sqrt(2/3):
    // the ratio works out to exactly 17/8
    let sc = presets::impulse_doubled_1d();
    let rep = suboptimality_report(&sc).unwrap();
    let l = 2.0 * 6.0f64.powf(0.25);
    let c = l * l / 6.0 + 1.0 / (l * l);
    let i = (2.0f64 / 3.0).sqrt();
    assert_relative_eq!(rep.strategy_cost, c, epsilon = 1e-9);
    assert_relative_eq!(rep.lower_bound, i, epsilon = 1e-9);
    assert_relative_eq!(rep.ratio, c / i, epsilon = 1e-9);
    assert_relative_eq!(rep.ratio, 17.0 / 8.0, epsilon = 1e-9);
}

#[test]
fn suboptimality_detuned_lq() {
    // c = (r + l·Σ²)·a/(2Σ) = (1+4)/4 = 1.25, I = 1
    let sc = presets::regular_lq_detuned();
    let rep = suboptimality_report(&sc).unwrap();
    assert_relative_eq!(rep.strategy_cost, 1.25, epsilon = 1e-9);
    assert_relative_eq!(rep.lower_bound, 1.0, epsilon = 1e-9);
    assert_relative_eq!(rep.ratio, 1.25, epsilon = 1e-9);
}

#[test]
fn scenario_json_round_trip() {
    for sc in presets::all() {
        let text = sc.to_json().unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, sc, "{} did not round-trip", sc.name);
    }
}

#[test]
fn sweep_csv_shape() {
    let sc = tiny(presets::singular_optimal_1d());
    let out = run_sweep(&sc).unwrap();
    let mut buf = Vec::new();
    out.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("eps,replications,mean_total"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn sweep_with_random_coefficients_has_no_limit_fields() {
    let mut sc = tiny(presets::regular_lq_1d());
    sc.target = crate::TargetModel {
        dim: 1,
        drift: crate::sde::DriftSpec::Zero,
        diffusion: crate::sde::DiffusionSpec::FactorScaled {
            base: SymMat::scalar(1.0),
        },
        factor: Some(crate::sde::OuFactorSpec {
            rate: 2.0,
            mean: 0.0,
            vol: 0.3,
            init: 0.0,
        }),
    };
    let out = run_sweep(&sc).unwrap();
    assert!(out.limit.is_none());
    assert!(out.suboptimality_ratio.is_none());
    assert!(out.rows.iter().all(|r| r.mean_total > 0.0));
    let mut buf = Vec::new();
    out.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().lines().count() == 3);
}
