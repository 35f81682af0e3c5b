use super::*;
use crate::cost::CostSpec;
use crate::experiments::presets;
use crate::linalg::SymMat;
use crate::sde::{MatrixFn, ScalarFn};
use crate::strategies::{ImpulseTriplet, JumpRule, Potential, RegularPolicy, SingularTriplet};
use approx::assert_relative_eq;
use nalgebra::DMatrix;

fn eye1() -> DMatrix<f64> {
    DMatrix::identity(1, 1)
}

fn impulse_triplet(l: f64) -> ImpulseTriplet {
    ImpulseTriplet {
        speed: FeedbackField::Zero,
        domain: Domain::Interval {
            half_width: ScalarFn::constant(l),
        },
        jump: JumpRule::Proportional {
            alpha: ScalarFn::constant(1.0),
        },
        potential: Potential::NormSquared,
    }
}

fn singular_triplet(l: f64) -> SingularTriplet {
    SingularTriplet {
        speed: FeedbackField::Zero,
        domain: Domain::Interval {
            half_width: ScalarFn::constant(l),
        },
        direction: DirectionField::RadialInward,
        potential: Potential::NormSquared,
    }
}

fn ou_policy(gain: f64) -> RegularPolicy {
    RegularPolicy {
        speed: FeedbackField::Linear {
            matrix: MatrixFn::constant(SymMat::scalar(gain)),
        },
        lyapunov: Potential::NormSquared,
        theta: 1.0,
        big_theta: gain,
    }
}

/// Exact TV distance between a histogram and a 1D density integrated over
/// the same bins (the density integral is the independent oracle here).
fn tv_against_density(hist: &Histogram, mut cdf: impl FnMut(f64) -> f64) -> f64 {
    let g = &hist.grid;
    let w = g.widths()[0];
    let mut tv = 0.0;
    for (i, &m) in hist.mass.iter().enumerate() {
        let c = g.center(i)[0];
        let expect = cdf(c + 0.5 * w) - cdf(c - 0.5 * w);
        tv += (m - expect).abs();
    }
    tv / 2.0
}

// ---------------------------------------------------------------------------
// test functions
// ---------------------------------------------------------------------------

#[test]
fn test_function_derivatives_match_finite_differences() {
    let f = TestFunction {
        exps: vec![2, 1],
        inner: 0.8,
        outer: 2.0,
    };
    let fd_g = 1e-6;
    let fd_h = 1e-4;
    for x in [[0.3, 0.4], [1.0, 0.9], [1.2, -0.7], [0.0, 0.0]] {
        let g = f.gradient(&x);
        let h = f.hessian(&x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += fd_g;
            xm[i] -= fd_g;
            let approx_g = (f.value(&xp) - f.value(&xm)) / (2.0 * fd_g);
            assert!(
                (approx_g - g[i]).abs() < 1e-6,
                "grad mismatch at {x:?}: {approx_g} vs {}",
                g[i]
            );
            for j in 0..2 {
                let mut xpp = x;
                xpp[i] += fd_h;
                xpp[j] += fd_h;
                let mut xpm = x;
                xpm[i] += fd_h;
                xpm[j] -= fd_h;
                let mut xmp = x;
                xmp[i] -= fd_h;
                xmp[j] += fd_h;
                let mut xmm = x;
                xmm[i] -= fd_h;
                xmm[j] -= fd_h;
                let approx_h = (f.value(&xpp) - f.value(&xpm) - f.value(&xmp) + f.value(&xmm))
                    / (4.0 * fd_h * fd_h);
                assert!(
                    (approx_h - h[(i, j)]).abs() < 1e-4 * (1.0 + h[(i, j)].abs()),
                    "hessian mismatch at {x:?} ({i},{j}): {approx_h} vs {}",
                    h[(i, j)]
                );
            }
        }
    }
    // compact support
    assert_eq!(f.value(&[3.0, 0.0]), 0.0);
    assert_eq!(f.gradient(&[3.0, 0.0])[0], 0.0);
}

#[test]
fn polynomial_set_counts() {
    // d=1 degrees 1..4
    assert_eq!(polynomial_test_set(1, 4, 10.0, 20.0).len(), 4);
    // d=2: C(6,2)-1 = 14
    assert_eq!(polynomial_test_set(2, 4, 10.0, 20.0).len(), 14);
}

// ---------------------------------------------------------------------------
// oracle: 1D chains against the analytic pairs
// ---------------------------------------------------------------------------

#[test]
fn oracle_impulse_triangular_density_and_rate() {
    let l = 1.3;
    let tr = impulse_triplet(l);
    let sol = markov_chain_oracle(
        &eye1(),
        &tr.speed,
        &tr.domain,
        &BoundaryRule::Jump(tr.jump.clone()),
        0.0,
        &OracleOptions::with_bins(200),
    )
    .unwrap();
    // triangular density (L-|y|)/L²: cdf on [-L,L]
    let cdf = |x: f64| -> f64 {
        let x = x.clamp(-l, l);
        if x <= 0.0 {
            0.5 * (1.0 + x / l).powi(2)
        } else {
            1.0 - 0.5 * (1.0 - x / l).powi(2)
        }
    };
    let tv = tv_against_density(&sol.pair.interior, cdf);
    assert!(tv < 0.01, "tv {tv}");
    // jump intensity 1/E[tau] = a/L², split evenly between the endpoints
    assert_relative_eq!(sol.pair.total_boundary_mass, 1.0 / (l * l), epsilon = 1e-6);
    let asym = (sol.pair.boundary[0].mass - sol.pair.boundary[1].mass).abs();
    assert!(asym < 1e-8 / (l * l), "asymmetry {asym}");
}

#[test]
fn oracle_singular_uniform_density_and_local_time() {
    let l = 0.9;
    let tr = singular_triplet(l);
    let sol = markov_chain_oracle(
        &eye1(),
        &tr.speed,
        &tr.domain,
        &BoundaryRule::Reflect(tr.direction),
        0.0,
        &OracleOptions::with_bins(200),
    )
    .unwrap();
    let cdf = |x: f64| ((x + l) / (2.0 * l)).clamp(0.0, 1.0);
    let tv = tv_against_density(&sol.pair.interior, cdf);
    assert!(tv < 0.01, "tv {tv}");
    // local-time rate a/(2L) up to the O(1/N) endpoint-cell correction
    assert_relative_eq!(
        sol.pair.total_boundary_mass,
        1.0 / (2.0 * l),
        max_relative = 0.01
    );
    // second moment of the uniform law
    let m2 = sol.pair.interior.integrate(|x| x[0] * x[0]);
    assert_relative_eq!(m2, l * l / 3.0, max_relative = 0.02);
}

#[test]
fn oracle_regular_ou_moments() {
    // U(x) = -x on a wide truncated interval: pi -> N(0, 1/2)
    let policy = ou_policy(1.0);
    let dom = Domain::Interval {
        half_width: ScalarFn::constant(4.5),
    };
    let sol = markov_chain_oracle(
        &eye1(),
        &policy.speed,
        &dom,
        &BoundaryRule::Reflect(DirectionField::RadialInward),
        0.0,
        &OracleOptions::with_bins(800),
    )
    .unwrap();
    let m1 = sol.pair.interior.integrate(|x| x[0]);
    let m2 = sol.pair.interior.integrate(|x| x[0] * x[0]);
    assert!(m1.abs() < 1e-8);
    // the upwind drift adds O(h) numerical diffusion, so the variance
    // carries a small positive bias at finite h
    assert_relative_eq!(m2, 0.5, max_relative = 0.01);
    // truncation leaves only negligible boundary mass
    assert!(sol.pair.total_boundary_mass < 1e-6);
}

// ---------------------------------------------------------------------------
// separability residual
// ---------------------------------------------------------------------------

/// Analytic stationary pair of the 1D center-jump chain, binned exactly.
fn analytic_impulse_pair(l: f64, bins: usize) -> OccupationPair {
    let grid = GridSpec {
        lo: vec![-l],
        hi: vec![l],
        bins: vec![bins],
        boundary_bins: 2,
    };
    let w = 2.0 * l / bins as f64;
    let cdf = |x: f64| -> f64 {
        let x = x.clamp(-l, l);
        if x <= 0.0 {
            0.5 * (1.0 + x / l).powi(2)
        } else {
            1.0 - 0.5 * (1.0 - x / l).powi(2)
        }
    };
    let mass: Vec<f64> = (0..bins)
        .map(|i| {
            let c = -l + (i as f64 + 0.5) * w;
            cdf(c + 0.5 * w) - cdf(c - 0.5 * w)
        })
        .collect();
    let nu = 1.0 / (l * l);
    OccupationPair {
        interior: Histogram { grid, mass },
        boundary: vec![
            BoundaryBin {
                point: vec![-l],
                mass: nu / 2.0,
            },
            BoundaryBin {
                point: vec![l],
                mass: nu / 2.0,
            },
        ],
        total_boundary_mass: nu,
    }
}

#[test]
fn residual_of_analytic_pair_is_quadrature_small() {
    let l = 1.3;
    let pair = analytic_impulse_pair(l, 400);
    let jump = JumpRule::Proportional {
        alpha: ScalarFn::constant(1.0),
    };
    let tests = default_test_set(&pair);
    let res = separability_residual(
        &pair,
        &eye1(),
        &FeedbackField::Zero,
        0.0,
        &BoundaryOp::Jump { rule: &jump },
        &tests,
    );
    assert!(res < 1e-3, "residual {res}");
}

#[test]
fn residual_detects_non_stationary_pair() {
    // point mass at 0, no boundary measure: residual for f=x² equals a = 1
    let grid = GridSpec {
        lo: vec![-1.0],
        hi: vec![1.0],
        bins: vec![101],
        boundary_bins: 2,
    };
    let mut mass = vec![0.0; 101];
    mass[50] = 1.0;
    let pair = OccupationPair {
        interior: Histogram { grid, mass },
        boundary: vec![],
        total_boundary_mass: 0.0,
    };
    let tests = vec![TestFunction {
        exps: vec![2],
        inner: 10.0,
        outer: 20.0,
    }];
    let res = separability_residual(
        &pair,
        &eye1(),
        &FeedbackField::Zero,
        0.0,
        &BoundaryOp::None,
        &tests,
    );
    assert_relative_eq!(res, 1.0, epsilon = 1e-9);
}

#[test]
fn residual_of_oracle_pair_decreases_under_refinement() {
    let l = 1.3;
    let tr = impulse_triplet(l);
    let res_at = |bins: usize| -> f64 {
        let sol = markov_chain_oracle(
            &eye1(),
            &tr.speed,
            &tr.domain,
            &BoundaryRule::Jump(tr.jump.clone()),
            0.0,
            &OracleOptions::with_bins(bins),
        )
        .unwrap();
        let tests = default_test_set(&sol.pair);
        separability_residual(
            &sol.pair,
            &eye1(),
            &FeedbackField::Zero,
            0.0,
            &BoundaryOp::Jump { rule: &tr.jump },
            &tests,
        )
    };
    let coarse = res_at(100);
    let fine = res_at(200);
    assert!(
        fine < coarse,
        "refinement must reduce the residual: {coarse} -> {fine}"
    );
    let order = (coarse / fine).log2();
    assert!(order >= 1.0, "empirical order {order}");
}

// ---------------------------------------------------------------------------
// empirical occupation from simulated paths
// ---------------------------------------------------------------------------

fn scaling() -> crate::cost::EpsilonScaling {
    let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
    crate::cost::derive_exponents(0.25, &spec).unwrap()
}

#[test]
fn empirical_reflected_uniform() {
    let l = 1.0;
    let tr = singular_triplet(l);
    let model = TargetModel::scalar(0.0, 1.0).unwrap();
    let path = crate::strategies::run_singular(
        &tr,
        &model,
        &scaling(),
        1.0,
        4000.0,
        9,
        &SimOptions::with_n_sub(200),
    )
    .unwrap();
    let grid = GridSpec::for_domain(&tr.domain, 0.0, 25, 2);
    let pair = empirical_occupation(&path, 0.1, &grid, Some(&tr.domain)).unwrap();
    assert!((pair.interior.total() - 1.0).abs() < 1e-9);
    let cdf = |x: f64| ((x + l) / (2.0 * l)).clamp(0.0, 1.0);
    let tv = tv_against_density(&pair.interior, cdf);
    assert!(tv < 0.05, "tv {tv}");
    assert_relative_eq!(pair.total_boundary_mass, 0.5 / l, max_relative = 0.10);
}

#[test]
fn empirical_impulse_triangular() {
    let l = 1.0;
    let tr = impulse_triplet(l);
    let model = TargetModel::scalar(0.0, 1.0).unwrap();
    let mut opts = SimOptions::with_n_sub(200);
    opts.bridge_correction = true;
    let path =
        crate::strategies::run_impulse(&tr, &model, &scaling(), 1.0, 4000.0, 11, &opts).unwrap();
    let grid = GridSpec::for_domain(&tr.domain, 0.0, 25, 2);
    let pair = empirical_occupation(&path, 0.1, &grid, Some(&tr.domain)).unwrap();
    let cdf = |x: f64| -> f64 {
        let x = x.clamp(-l, l);
        if x <= 0.0 {
            0.5 * (1.0 + x / l).powi(2)
        } else {
            1.0 - 0.5 * (1.0 - x / l).powi(2)
        }
    };
    let tv = tv_against_density(&pair.interior, cdf);
    assert!(tv < 0.05, "tv {tv}");
    assert_relative_eq!(pair.total_boundary_mass, 1.0 / (l * l), max_relative = 0.10);
}

#[test]
fn empirical_ou_variance() {
    let policy = ou_policy(1.0);
    let model = TargetModel::scalar(0.0, 1.0).unwrap();
    let path = crate::strategies::run_regular(
        &policy,
        &model,
        &scaling(),
        1.0,
        5000.0,
        13,
        &SimOptions::with_n_sub(100),
    )
    .unwrap();
    let dom = Domain::Interval {
        half_width: ScalarFn::constant(5.0),
    };
    let grid = GridSpec::for_domain(&dom, 0.0, 200, 2);
    let pair = empirical_occupation(&path, 0.1, &grid, None).unwrap();
    let var = pair.interior.integrate(|x| x[0] * x[0]);
    assert_relative_eq!(var, 0.5, max_relative = 0.05);
}

#[test]
fn empty_after_burn_in_is_an_error() {
    let grid = GridSpec {
        lo: vec![-1.0],
        hi: vec![1.0],
        bins: vec![4],
        boundary_bins: 2,
    };
    let g = crate::TimeGrid::from_steps(0.0, 1.0, 1).unwrap();
    let path =
        ControlledPath::from_parts(g, 1, 1.0, 1.0, vec![0.0, 0.0], vec![0.0], vec![], vec![]);
    assert!(matches!(
        empirical_occupation(&path, 0.9, &grid, None),
        Err(crate::Error::EmptyPath)
    ));
}

// ---------------------------------------------------------------------------
// limit costs
// ---------------------------------------------------------------------------

#[test]
fn limit_cost_impulse_matches_closed_form() {
    let sc = presets::impulse_optimal_1d();
    let a = eye1();
    let oracle = limit_cost(
        &a,
        &sc.strategy,
        &sc.cost,
        0.0,
        &LimitEstimator::Oracle { bins: 400 },
    )
    .unwrap();
    let target = (2.0f64 / 3.0).sqrt();
    assert_relative_eq!(oracle.total, target, max_relative = 2e-3);
    let cf = limit_cost(&a, &sc.strategy, &sc.cost, 0.0, &LimitEstimator::ClosedForm).unwrap();
    assert_relative_eq!(cf.total, target, epsilon = 1e-12);
    // at the optimum the deviation and intervention components balance
    assert_relative_eq!(cf.deviation_term, cf.fixed_term, epsilon = 1e-12);
}

#[test]
fn limit_cost_singular_matches_closed_form() {
    let sc = presets::singular_optimal_1d();
    let a = eye1();
    let l = 0.75f64.powf(1.0 / 3.0);
    let target = l * l / 3.0 + 1.0 / (2.0 * l);
    let cf = limit_cost(&a, &sc.strategy, &sc.cost, 0.0, &LimitEstimator::ClosedForm).unwrap();
    assert_relative_eq!(cf.total, target, epsilon = 1e-12);
    let oracle = limit_cost(
        &a,
        &sc.strategy,
        &sc.cost,
        0.0,
        &LimitEstimator::Oracle { bins: 400 },
    )
    .unwrap();
    assert_relative_eq!(oracle.total, target, max_relative = 5e-3);
}

#[test]
fn limit_cost_regular_matches_closed_form() {
    let sc = presets::regular_lq_1d();
    let a = eye1();
    let cf = limit_cost(&a, &sc.strategy, &sc.cost, 0.0, &LimitEstimator::ClosedForm).unwrap();
    assert_relative_eq!(cf.total, 1.0, epsilon = 1e-12);
    let oracle = limit_cost(
        &a,
        &sc.strategy,
        &sc.cost,
        0.0,
        &LimitEstimator::Oracle { bins: 800 },
    )
    .unwrap();
    assert_relative_eq!(oracle.total, 1.0, max_relative = 1.5e-2);
}

#[test]
fn integrate_limit_constant_scales_with_horizon() {
    let sc = presets::impulse_optimal_1d();
    let c = integrate_limit_over_time(
        &sc.target,
        &sc.strategy,
        &sc.cost,
        3.0,
        33,
        &LimitEstimator::ClosedForm,
    )
    .unwrap();
    assert_relative_eq!(c.total, 3.0 * (2.0f64 / 3.0).sqrt(), epsilon = 1e-10);
    let zero = integrate_limit_over_time(
        &sc.target,
        &sc.strategy,
        &sc.cost,
        0.0,
        33,
        &LimitEstimator::ClosedForm,
    )
    .unwrap();
    assert_eq!(zero.total, 0.0);
}

#[test]
fn integrate_limit_ramp_weight() {
    // ramp weight r_t = 1+t on [0,1] with a fixed domain: the closed-form
    // integrand is c(t) = r_t·L²/6 + a/L², so the exact integral is
    // L²/6·(3/2) + 1/L²
    let mut sc = presets::impulse_optimal_1d();
    sc.cost.r = ScalarFn::Ramp {
        from: 1.0,
        to: 2.0,
        t_end: 1.0,
    };
    let l = 6.0f64.powf(0.25);
    let c = integrate_limit_over_time(
        &sc.target,
        &sc.strategy,
        &sc.cost,
        1.0,
        2001,
        &LimitEstimator::ClosedForm,
    )
    .unwrap();
    let exact = l * l / 6.0 * 1.5 + 1.0 / (l * l);
    assert_relative_eq!(c.total, exact, max_relative = 1e-6);
}

#[test]
fn lower_bound_integral_of_ramp_weight() {
    // the weighted lower bound I(a, r_t, k) = Tr(aB)·sqrt(r_t k) integrates
    // to Tr(aB)·(2/3)(2^{3/2} - 1) for r_t = 1+t on [0,1]
    let trace_ab = (2.0f64 / 3.0).sqrt();
    let n = 2001;
    let dt = 1.0 / (n - 1) as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let t = i as f64 * dt;
        let w = if i == 0 || i == n - 1 { 0.5 * dt } else { dt };
        let lb = crate::closed_form::impulse_lower_bound(&eye1(), &eye1(), 1.0 + t, 1.0).unwrap();
        acc += w * lb.i_value;
    }
    let exact = trace_ab * (2.0 / 3.0) * (2.0f64.powf(1.5) - 1.0);
    assert_relative_eq!(acc, exact, max_relative = 1e-6);
}

#[test]
fn uniqueness_probe_small() {
    let sc = presets::impulse_optimal_1d();
    let worst = uniqueness_probe(&eye1(), &sc.strategy, 0.0, 100, 3).unwrap();
    assert!(worst < 1e-8, "pairwise distance {worst}");
}

#[test]
fn occupation_csv_has_rows() {
    let pair = analytic_impulse_pair(1.0, 8);
    let mut buf = Vec::new();
    pair.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().count() > 9);
    assert!(text.starts_with("kind,x1,mass"));
}

#[test]
fn oracle_partial_jump_pair_is_stationary() {
    // alpha = 0.5: the jump deposit interpolates between nodes; the pair
    // must still satisfy the adjoint constraint
    let tr = ImpulseTriplet {
        speed: FeedbackField::Zero,
        domain: Domain::Interval {
            half_width: ScalarFn::constant(1.0),
        },
        jump: JumpRule::Proportional {
            alpha: ScalarFn::constant(0.5),
        },
        potential: Potential::NormSquared,
    };
    let sol = markov_chain_oracle(
        &eye1(),
        &tr.speed,
        &tr.domain,
        &BoundaryRule::Jump(tr.jump.clone()),
        0.0,
        &OracleOptions::with_bins(200),
    )
    .unwrap();
    let tests = default_test_set(&sol.pair);
    let res = separability_residual(
        &sol.pair,
        &eye1(),
        &FeedbackField::Zero,
        0.0,
        &BoundaryOp::Jump { rule: &tr.jump },
        &tests,
    );
    assert!(res < 1e-3, "residual {res}");
    // partial jumps hit the boundary more often than center jumps
    assert!(sol.pair.total_boundary_mass > 1.0);
}

#[test]
fn oracle_reports_iteration_budget_exhaustion() {
    let sc = presets::impulse_optimal_1d();
    let opts = OracleOptions {
        max_iters: 10,
        ..OracleOptions::with_bins(100)
    };
    let err = oracle_pair_for(&eye1(), &sc.strategy, 0.0, &opts).unwrap_err();
    assert!(
        matches!(err, crate::Error::PowerIterationFailed { .. }),
        "{err}"
    );
}

#[test]
fn grid_locate_center_round_trip_2d() {
    let grid = GridSpec {
        lo: vec![-1.5, -0.75],
        hi: vec![1.5, 0.75],
        bins: vec![7, 5],
        boundary_bins: 8,
    };
    for flat in 0..grid.n_cells() {
        let c = grid.center(flat);
        assert_eq!(grid.locate(&c), Some(flat), "cell {flat} center {c:?}");
    }
    // outside points have no cell; top faces belong to the last cell
    assert_eq!(grid.locate(&[2.0, 0.0]), None);
    assert!(grid.locate(&[1.5, 0.75]).is_some());
}

#[test]
fn integrate_limit_with_moving_domain() {
    // ramping the interval half-width L_t while holding weights fixed:
    // closed form c(t) = L_t²/6 + a/L_t², integrated by the trapezoid rule
    let mut sc = presets::impulse_optimal_1d();
    let (l0, l1) = (1.2, 1.8);
    sc.strategy = StrategySpec::Impulse(ImpulseTriplet {
        speed: FeedbackField::Zero,
        domain: Domain::Interval {
            half_width: ScalarFn::Ramp {
                from: l0,
                to: l1,
                t_end: 1.0,
            },
        },
        jump: JumpRule::Proportional {
            alpha: ScalarFn::constant(1.0),
        },
        potential: Potential::NormSquared,
    });
    let c = integrate_limit_over_time(
        &sc.target,
        &sc.strategy,
        &sc.cost,
        1.0,
        4001,
        &LimitEstimator::ClosedForm,
    )
    .unwrap();
    // exact: ∫ L²/6 dt + ∫ 1/L² dt for L(t) = l0 + (l1-l0)t
    let dl = l1 - l0;
    let exact_d = (l1.powi(3) - l0.powi(3)) / (3.0 * dl) / 6.0;
    let exact_f = (1.0 / l0 - 1.0 / l1) / dl;
    assert_relative_eq!(c.total, exact_d + exact_f, max_relative = 1e-6);
}

#[test]
fn impulse_proportional_term_oracle_vs_closed_form() {
    // jump-to-center impulse paying both fixed and proportional costs:
    // c = r L²/6 + (k·F + h·P(L)) · a/L²
    let l = 1.1;
    let strategy = StrategySpec::Impulse(impulse_triplet(l));
    let cost = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.3, 1.0, 0.0, 0.8, 0.7);
    let cf = limit_cost(&eye1(), &strategy, &cost, 0.0, &LimitEstimator::ClosedForm).unwrap();
    let nu = 1.0 / (l * l);
    assert_relative_eq!(cf.fixed_term, 0.8 * nu, epsilon = 1e-12);
    assert_relative_eq!(cf.proportional_term, 0.7 * 1.3 * l * nu, epsilon = 1e-12);
    let oracle = limit_cost(
        &eye1(),
        &strategy,
        &cost,
        0.0,
        &LimitEstimator::Oracle { bins: 200 },
    )
    .unwrap();
    assert_relative_eq!(oracle.total, cf.total, max_relative = 2e-3);
    assert_relative_eq!(
        oracle.proportional_term,
        cf.proportional_term,
        max_relative = 2e-3
    );
}
