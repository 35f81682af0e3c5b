//! Canonical scenario presets: the explicitly solvable 1D/2D instances used
//! throughout the test and acceptance suites, with their optimal (or
//! deliberately detuned) strategy parameters.
//!
//! All presets use `β = 1/2` (fixed costs of order ε², proportional costs of
//! order ε^{3/2}). The start-up transient of the renormalized cost decays
//! like `ε^{2β}/T`, so this choice keeps the finite-ε bias at the percent
//! level for the ε-grids used here; the limit itself does not depend on β.

use crate::cost::{CostFn, CostSpec, WeightFn};
use crate::linalg::SymMat;
use crate::sde::{MatrixFn, ScalarFn};
use crate::strategies::{
    DirectionField, Domain, FeedbackField, ImpulseTriplet, JumpRule, Potential, RegularPolicy,
    SingularTriplet, StrategySpec,
};
use crate::{closed_form, Result, TargetModel};

use super::{Scenario, SolverOptions};

fn cost_1d(r: f64, l: f64, k: f64, h: f64) -> CostSpec {
    CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, r, l, k, h)
}

fn interval_impulse(half_width: f64) -> StrategySpec {
    StrategySpec::Impulse(ImpulseTriplet {
        speed: FeedbackField::Zero,
        domain: Domain::Interval {
            half_width: ScalarFn::constant(half_width),
        },
        jump: JumpRule::Proportional {
            alpha: ScalarFn::constant(1.0),
        },
        potential: Potential::NormSquared,
    })
}

/// Optimal 1D impulse tracking: `a = 1`, `r = k = 1`, `D = x²`, `F ≡ 1`,
/// `U ≡ 0`, domain `(-6^{1/4}, 6^{1/4})`, jump to center. Limit cost
/// `√(2/3)`.
pub fn impulse_optimal_1d() -> Scenario {
    let l_star = 6.0f64.powf(0.25);
    Scenario {
        name: "impulse_optimal_1d".into(),
        target: TargetModel::scalar(0.0, 1.0).expect("valid model"),
        cost: cost_1d(1.0, 0.0, 1.0, 0.0),
        beta: 0.5,
        strategy: interval_impulse(l_star),
        horizon: 1.0,
        epsilon_list: vec![0.2, 0.1, 0.05],
        replications: 1024,
        base_seed: 2024,
        solver: SolverOptions {
            bridge_correction: true,
            ..SolverOptions::default()
        },
    }
}

/// The same impulse scenario with the domain half-width doubled: a
/// deliberately suboptimal strategy (limit cost `(2L*)²/6 + 1/(2L*)²`).
pub fn impulse_doubled_1d() -> Scenario {
    let l_star = 6.0f64.powf(0.25);
    Scenario {
        name: "impulse_doubled_1d".into(),
        strategy: interval_impulse(2.0 * l_star),
        ..impulse_optimal_1d()
    }
}

/// Long-horizon variant of the optimal impulse scenario used for the
/// jump-count scaling diagnostic (the renewal limit needs `T/ε^{2β}` well
/// past the first cycle).
pub fn impulse_jump_rate_1d() -> Scenario {
    Scenario {
        name: "impulse_jump_rate_1d".into(),
        horizon: 20.0,
        replications: 64,
        ..impulse_optimal_1d()
    }
}

/// Optimal 1D singular tracking: reflection at `L = (3/4)^{1/3}`,
/// `a = r = h = 1`, `P = |·|`. Limit cost `L²/3 + 1/(2L) ≈ 0.82548`.
pub fn singular_optimal_1d() -> Scenario {
    let l_star = 0.75f64.powf(1.0 / 3.0);
    Scenario {
        name: "singular_optimal_1d".into(),
        target: TargetModel::scalar(0.0, 1.0).expect("valid model"),
        cost: cost_1d(1.0, 0.0, 0.0, 1.0),
        beta: 0.5,
        strategy: StrategySpec::Singular(SingularTriplet {
            speed: FeedbackField::Zero,
            domain: Domain::Interval {
                half_width: ScalarFn::constant(l_star),
            },
            direction: DirectionField::RadialInward,
            potential: Potential::NormSquared,
        }),
        horizon: 1.0,
        epsilon_list: vec![0.2, 0.1, 0.05],
        replications: 512,
        base_seed: 77,
        solver: SolverOptions {
            n_sub: 200,
            ..SolverOptions::default()
        },
    }
}

fn regular_scenario(name: &str, gain: f64) -> Scenario {
    Scenario {
        name: name.into(),
        target: TargetModel::scalar(0.0, 1.0).expect("valid model"),
        cost: cost_1d(1.0, 1.0, 0.0, 0.0),
        beta: 0.5,
        strategy: StrategySpec::Regular(RegularPolicy {
            speed: FeedbackField::Linear {
                matrix: MatrixFn::constant(SymMat::scalar(gain)),
            },
            lyapunov: Potential::NormSquared,
            // A V = a + 2 x·U(x) = a - 2·gain·x² ≤ θ - 2Θ x²
            theta: 1.0,
            big_theta: gain,
        }),
        horizon: 1.0,
        epsilon_list: vec![0.2, 0.1, 0.05],
        replications: 512,
        base_seed: 909,
        solver: SolverOptions::default(),
    }
}

/// Optimal 1D LQ tracking: `U(x) = -x`, `a = r = l = 1`, `D = x²`,
/// `Q = u²`. Limit cost 1, stationary variance `a/(2Σ) = 1/2`.
pub fn regular_lq_1d() -> Scenario {
    regular_scenario("regular_lq_1d", 1.0)
}

/// Detuned LQ policy `U(x) = -2x`: limit cost `(1+4)·(1/4) = 1.25`,
/// suboptimality ratio 1.25.
pub fn regular_lq_detuned() -> Scenario {
    regular_scenario("regular_lq_detuned", 2.0)
}

/// 2D impulse tracking at the optimal ellipsoidal domain for
/// `a = I`, `Σ^D = diag(1, 4)`: `G = {x : xᵀBx < 2}` with `B` from the
/// quadratic matrix equation; jump to center.
pub fn impulse_ellipsoid_2d() -> Result<Scenario> {
    let a = nalgebra::DMatrix::<f64>::identity(2, 2);
    let sigma_d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
    let lb = closed_form::impulse_lower_bound(&a, &sigma_d, 1.0, 1.0)?;
    let cost = CostSpec {
        deviation: CostFn::Quadratic {
            matrix: SymMat(sigma_d),
        },
        zeta_d: 2.0,
        regular: CostFn::Quadratic {
            matrix: SymMat::identity(2),
        },
        zeta_q: 2.0,
        fixed: CostFn::Counting {
            weights: vec![0.5, 0.5],
        },
        zeta_f: 0.0,
        proportional: CostFn::WeightedL1 {
            weights: vec![0.0, 0.0],
        },
        zeta_p: 1.0,
        r: WeightFn::constant(1.0),
        l: WeightFn::constant(0.0),
        k: WeightFn::constant(1.0),
        h: WeightFn::constant(0.0),
    };
    Ok(Scenario {
        name: "impulse_ellipsoid_2d".into(),
        target: TargetModel::constant(vec![0.0, 0.0], SymMat::identity(2))?,
        cost,
        beta: 0.5,
        strategy: StrategySpec::Impulse(ImpulseTriplet {
            speed: FeedbackField::Zero,
            domain: Domain::Ellipsoid {
                matrix: MatrixFn::constant(SymMat(lb.domain_matrix)),
            },
            jump: JumpRule::Proportional {
                alpha: ScalarFn::constant(1.0),
            },
            potential: Potential::NormSquared,
        }),
        horizon: 1.0,
        epsilon_list: vec![0.2, 0.1],
        replications: 64,
        base_seed: 4242,
        solver: SolverOptions {
            oracle_bins: 96,
            ..SolverOptions::default()
        },
    })
}

/// Every named preset, for CLI listing and config generation.
pub fn all() -> Vec<Scenario> {
    let mut v = vec![
        impulse_optimal_1d(),
        impulse_doubled_1d(),
        impulse_jump_rate_1d(),
        singular_optimal_1d(),
        regular_lq_1d(),
        regular_lq_detuned(),
    ];
    if let Ok(s) = impulse_ellipsoid_2d() {
        v.push(s);
    }
    v
}

pub fn by_name(name: &str) -> Option<Scenario> {
    all().into_iter().find(|s| s.name == name)
}
