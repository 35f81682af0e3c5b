//! Simulation and verification library for feedback tracking strategies.
//!
//! A tracker follows a stochastic target `dX° = b_t dt + √a_t dW_t` and pays
//! a deviation penalty plus intervention costs (fixed + proportional for
//! jumps, proportional for singular control, running for regular control).
//! Under the small-cost scaling `ε → 0` the renormalized cost
//! `ε^{-ζ_D β} J^ε` of a feedback strategy converges to a time integral of a
//! stationary-measure functional; this crate simulates the strategies,
//! evaluates the scaled cost, estimates the stationary occupation measures
//! (by long-run simulation and by a discretized-chain oracle), and solves
//! the closed-form matrix equations that give the asymptotic lower bounds.
//!
//! Module map:
//! - [`sde`] — Brownian increments and Euler scheme for the target process.
//! - [`cost`] — cost functions `D, Q, F, P`, homogeneity degrees, ε-exponents,
//!   and evaluation of the scaled cost functional.
//! - [`strategies`] — impulse / singular / regular feedback strategies and
//!   their controlled deviation paths.
//! - [`stationary`] — occupation-measure estimation, the stationarity
//!   (separability) residual, the finite-chain oracle and limit costs.
//! - [`closed_form`] — exact solvers: the quadratic matrix equation for the
//!   impulse lower bound, the LQ feedback solution, Lyapunov covariances.
//! - [`experiments`] — scenario configs, ε-sweeps, suboptimality reports and
//!   CSV/JSON emission.

// Index loops mirror the summation conventions of the formulas, and the
// negated float comparisons are NaN-rejecting guards.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod closed_form;
pub mod cost;
mod error;
pub mod experiments;
pub mod linalg;
pub mod sde;
pub mod stationary;
pub mod strategies;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;

pub use cost::{CostBreakdown, CostFn, CostSpec, EpsilonScaling, WeightFn};
pub use sde::{TargetModel, TargetPath, TimeGrid};
pub use stationary::{GridSpec, OccupationPair};
pub use strategies::{
    ControlledPath, Domain, ImpulseTriplet, RegularPolicy, SingularTriplet, StrategySpec,
};

/// Splitmix64-style seed mixing so that (base, lane, index) tuples give
/// independent, platform-stable RNG streams.
pub fn mix_seed(base: u64, lane: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(lane.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
