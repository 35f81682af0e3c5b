//! Cost functions `D, Q, F, P`, their homogeneity degrees, the ε-exponent
//! relation, and evaluation of the scaled cost functional
//!
//! ```text
//! J^ε = ∫_0^T ( r_t D(X^ε_t) + ε^{β_Q} l_t Q(u^ε_t) ) dt
//!     + Σ_j ( ε^{β_F} k_{τ_j} F(ξ^ε_j) + ε^{β_P} h_{τ_j} P(ξ^ε_j) )   (impulse)
//!     + ∫_0^T ε^{β_P} h_t P(γ^ε_t) dφ^ε_t                              (singular)
//! ```
//!
//! with exponents tied together by
//! `β_F/(ζ_D+2-ζ_F) = β_P/(ζ_D+2-ζ_P) = β_Q/(ζ_D+ζ_Q) = β`.

use serde::{Deserialize, Serialize};

use crate::linalg::SymMat;
use crate::sde::ScalarFn;
use crate::strategies::ControlledPath;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Cost functions
// ---------------------------------------------------------------------------

/// Homogeneous cost function catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    /// `x ↦ xᵀ M x`, degree 2.
    Quadratic { matrix: SymMat },
    /// `ξ ↦ Σ w_i 1{ξ_i ≠ 0}`, degree 0.
    Counting { weights: Vec<f64> },
    /// `ξ ↦ Σ w_i |ξ_i|`, degree 1.
    WeightedL1 { weights: Vec<f64> },
    /// `x ↦ coef · ‖x‖₂^exponent`, degree `exponent`.
    PowerNorm { coef: f64, exponent: f64 },
    /// `x ↦ xᵀ M x + shift`: intentionally *not* homogeneous; used to
    /// exercise the homogeneity validator.
    ShiftedQuadratic { matrix: SymMat, shift: f64 },
}

impl CostFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CostFn::Quadratic { matrix } => {
                let m = &matrix.0;
                let mut s = 0.0;
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        s += x[i] * m[(i, j)] * x[j];
                    }
                }
                s
            }
            CostFn::Counting { weights } => x
                .iter()
                .zip(weights)
                .filter(|(xi, _)| **xi != 0.0)
                .map(|(_, w)| *w)
                .sum(),
            CostFn::WeightedL1 { weights } => {
                x.iter().zip(weights).map(|(xi, w)| xi.abs() * w).sum()
            }
            CostFn::PowerNorm { coef, exponent } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                coef * r2.sqrt().powf(*exponent)
            }
            CostFn::ShiftedQuadratic { matrix, shift } => {
                CostFn::Quadratic {
                    matrix: matrix.clone(),
                }
                .eval(x)
                    + shift
            }
        }
    }

    /// The degree the catalog entry is actually homogeneous with, when any.
    pub fn natural_degree(&self) -> Option<f64> {
        match self {
            CostFn::Quadratic { .. } => Some(2.0),
            CostFn::Counting { .. } => Some(0.0),
            CostFn::WeightedL1 { .. } => Some(1.0),
            CostFn::PowerNorm { exponent, .. } => Some(*exponent),
            CostFn::ShiftedQuadratic { .. } => None,
        }
    }

    pub fn quadratic_scalar(c: f64) -> Self {
        CostFn::Quadratic {
            matrix: SymMat::scalar(c),
        }
    }

    /// Dimension the catalog entry is pinned to by its data, when any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            CostFn::Quadratic { matrix } | CostFn::ShiftedQuadratic { matrix, .. } => {
                Some(matrix.dim())
            }
            CostFn::Counting { weights } | CostFn::WeightedL1 { weights } => Some(weights.len()),
            CostFn::PowerNorm { .. } => None,
        }
    }
}

/// Positive deterministic weight function of time. Re-exported alias of the
/// coefficient `ScalarFn` catalog.
pub type WeightFn = ScalarFn;

/// The cost data `(D, ζ_D), (Q, ζ_Q), (F, ζ_F), (P, ζ_P)` with time weights
/// `r, l, k, h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub deviation: CostFn,
    pub zeta_d: f64,
    pub regular: CostFn,
    pub zeta_q: f64,
    pub fixed: CostFn,
    pub zeta_f: f64,
    pub proportional: CostFn,
    pub zeta_p: f64,
    pub r: WeightFn,
    pub l: WeightFn,
    pub k: WeightFn,
    pub h: WeightFn,
}

impl CostSpec {
    /// Validates the degree constraints `ζ_D > 0, ζ_Q > 1, ζ_F = 0, ζ_P = 1`
    /// and weight positivity on the horizon.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.zeta_d > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "zeta_d must be > 0, got {}",
                self.zeta_d
            )));
        }
        if !(self.zeta_q > 1.0) {
            return Err(Error::InvalidSpec(format!(
                "zeta_q must be > 1, got {}",
                self.zeta_q
            )));
        }
        if self.zeta_f != 0.0 {
            return Err(Error::InvalidSpec(format!(
                "zeta_f must be 0, got {}",
                self.zeta_f
            )));
        }
        if self.zeta_p != 1.0 {
            return Err(Error::InvalidSpec(format!(
                "zeta_p must be 1, got {}",
                self.zeta_p
            )));
        }
        for (name, w) in [
            ("r", &self.r),
            ("l", &self.l),
            ("k", &self.k),
            ("h", &self.h),
        ] {
            let n = 16;
            for i in 0..=n {
                let t = horizon * i as f64 / n as f64;
                if !(w.eval(t) >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "weight {name} must be finite and nonnegative at t={t}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical 1D spec: `D = σ_D x²`, `Q = σ_Q u²`, `F = f·1{ξ≠0}`,
    /// `P = p|ξ|`, constant weights.
    #[allow(clippy::too_many_arguments)]
    pub fn quadratic_1d(
        sigma_d: f64,
        sigma_q: f64,
        f_cost: f64,
        p_cost: f64,
        r: f64,
        l: f64,
        k: f64,
        h: f64,
    ) -> Self {
        CostSpec {
            deviation: CostFn::quadratic_scalar(sigma_d),
            zeta_d: 2.0,
            regular: CostFn::quadratic_scalar(sigma_q),
            zeta_q: 2.0,
            fixed: CostFn::Counting {
                weights: vec![f_cost],
            },
            zeta_f: 0.0,
            proportional: CostFn::WeightedL1 {
                weights: vec![p_cost],
            },
            zeta_p: 1.0,
            r: WeightFn::constant(r),
            l: WeightFn::constant(l),
            k: WeightFn::constant(k),
            h: WeightFn::constant(h),
        }
    }
}

// ---------------------------------------------------------------------------
// Epsilon scaling
// ---------------------------------------------------------------------------

/// The exponent family derived from `β`: all derived exponents are computed
/// on the fly from `β` and the degrees, so the three ratio identities hold
/// exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonScaling {
    pub beta: f64,
    pub zeta_d: f64,
    pub zeta_q: f64,
    pub zeta_f: f64,
    pub zeta_p: f64,
}

impl EpsilonScaling {
    pub fn beta_q(&self) -> f64 {
        self.beta * (self.zeta_d + self.zeta_q)
    }

    pub fn beta_f(&self) -> f64 {
        self.beta * (self.zeta_d + 2.0 - self.zeta_f)
    }

    pub fn beta_p(&self) -> f64 {
        self.beta * (self.zeta_d + 2.0 - self.zeta_p)
    }

    /// The renormalization multiplies every term by `ε^{-ζ_D β}`.
    pub fn renorm_factor(&self, eps: f64) -> f64 {
        eps.powf(-self.zeta_d * self.beta)
    }

    /// Spatial scale `ε^β` of the controlled deviation.
    pub fn space_scale(&self, eps: f64) -> f64 {
        eps.powf(self.beta)
    }

    /// Intrinsic time scale `ε^{2β}` of the rescaled dynamics.
    pub fn time_scale(&self, eps: f64) -> f64 {
        eps.powf(2.0 * self.beta)
    }
}

/// Derives `β_Q = β(ζ_D+ζ_Q)`, `β_F = β(ζ_D+2-ζ_F)`, `β_P = β(ζ_D+2-ζ_P)`.
pub fn derive_exponents(beta: f64, spec: &CostSpec) -> Result<EpsilonScaling> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(EpsilonScaling {
        beta,
        zeta_d: spec.zeta_d,
        zeta_q: spec.zeta_q,
        zeta_f: spec.zeta_f,
        zeta_p: spec.zeta_p,
    })
}

// ---------------------------------------------------------------------------
// Cost evaluation
// ---------------------------------------------------------------------------

/// Per-term cost values; `total()` is always the sum of the four terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `∫ r_t D(X^ε_t) dt`
    pub deviation_term: f64,
    /// `ε^{β_Q} ∫ l_t Q(u^ε_t) dt`
    pub regular_term: f64,
    /// `ε^{β_F} Σ k_{τ_j} F(ξ^ε_j)`
    pub fixed_term: f64,
    /// `ε^{β_P} Σ h_{τ_j} P(ξ^ε_j)` plus `ε^{β_P} ∫ h_t P(γ^ε_t) dφ^ε_t`
    pub proportional_term: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.deviation_term + self.regular_term + self.fixed_term + self.proportional_term
    }

    pub fn scaled(&self, c: f64) -> CostBreakdown {
        CostBreakdown {
            deviation_term: self.deviation_term * c,
            regular_term: self.regular_term * c,
            fixed_term: self.fixed_term * c,
            proportional_term: self.proportional_term * c,
        }
    }
}

/// Evaluates the ε-scaled cost functional along a controlled path.
/// Time integrals use left-endpoint quadrature on the simulation grid.
pub fn eval_cost(
    path: &ControlledPath,
    spec: &CostSpec,
    scaling: &EpsilonScaling,
    eps: f64,
) -> Result<CostBreakdown> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let n = path.grid.n_steps;
    if path.n_states() != n + 1 || path.controls_len() != n {
        return Err(Error::PathMismatch(format!(
            "grid has {} steps but path holds {} states / {} controls",
            n,
            path.n_states(),
            path.controls_len()
        )));
    }
    let dt = path.grid.dt;
    let eps_bq = eps.powf(scaling.beta_q());
    let eps_bf = eps.powf(scaling.beta_f());
    let eps_bp = eps.powf(scaling.beta_p());

    let mut deviation_term = 0.0;
    let mut regular_term = 0.0;
    for i in 0..n {
        let t = path.grid.t(i);
        deviation_term += spec.r.eval(t) * spec.deviation.eval(path.state(i)) * dt;
        regular_term += spec.l.eval(t) * spec.regular.eval(path.control(i)) * dt;
    }
    regular_term *= eps_bq;

    let mut fixed_term = 0.0;
    let mut proportional_term = 0.0;
    for j in &path.jumps {
        fixed_term += spec.k.eval(j.time) * spec.fixed.eval(j.jump.as_slice());
        proportional_term += spec.h.eval(j.time) * spec.proportional.eval(j.jump.as_slice());
    }
    fixed_term *= eps_bf;
    proportional_term *= eps_bp;

    let mut singular_term = 0.0;
    for r in &path.reflections {
        singular_term += spec.h.eval(r.time) * spec.proportional.eval(r.gamma.as_slice()) * r.dphi;
    }
    proportional_term += eps_bp * singular_term;

    Ok(CostBreakdown {
        deviation_term,
        regular_term,
        fixed_term,
        proportional_term,
    })
}

/// Multiplies every term by the renormalizer `ε^{-ζ_D β}`.
pub fn renormalize(
    breakdown: &CostBreakdown,
    eps: f64,
    scaling: &EpsilonScaling,
) -> Result<CostBreakdown> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(breakdown.scaled(scaling.renorm_factor(eps)))
}

/// Max over the samples and over `{D, Q, F, P}` of
/// `|f(εx) - ε^{ζ_f} f(x)| / (1 + |f(x)|)`.
pub fn check_homogeneity(spec: &CostSpec, samples: &[(f64, Vec<f64>)]) -> f64 {
    let parts: [(&CostFn, f64); 4] = [
        (&spec.deviation, spec.zeta_d),
        (&spec.regular, spec.zeta_q),
        (&spec.fixed, spec.zeta_f),
        (&spec.proportional, spec.zeta_p),
    ];
    let mut worst: f64 = 0.0;
    for (eps, x) in samples {
        let scaled: Vec<f64> = x.iter().map(|v| v * eps).collect();
        for (f, zeta) in parts {
            let fx = f.eval(x);
            let err = (f.eval(&scaled) - eps.powf(zeta) * fx).abs() / (1.0 + fx.abs());
            worst = worst.max(err);
        }
    }
    worst
}

/// Default sample cloud for homogeneity checking.
pub fn homogeneity_samples(dim: usize) -> Vec<(f64, Vec<f64>)> {
    let mut out = Vec::new();
    let eps_list = [0.5, 0.1, 0.037, 1.7];
    for (i, &e) in eps_list.iter().enumerate() {
        for k in 1..=4 {
            let x: Vec<f64> = (0..dim)
                .map(|j| {
                    let s = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                    s * (0.3 + 0.45 * k as f64 + 0.11 * (i + j) as f64)
                })
                .collect();
            out.push((e, x));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{JumpEvent, ReflectionEvent};
    use crate::TimeGrid;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn path_for_tests(
        grid: TimeGrid,
        eps: f64,
        scale: f64,
        states: Vec<f64>,
        controls: Vec<f64>,
        jumps: Vec<JumpEvent>,
        reflections: Vec<ReflectionEvent>,
    ) -> ControlledPath {
        ControlledPath::from_parts(grid, 1, eps, scale, states, controls, jumps, reflections)
    }

    fn scaling(beta: f64) -> EpsilonScaling {
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        derive_exponents(beta, &spec).unwrap()
    }

    #[test]
    fn exponents_quarter() {
        let s = scaling(0.25);
        assert_relative_eq!(s.beta_q(), 1.0);
        assert_relative_eq!(s.beta_f(), 1.0);
        assert_relative_eq!(s.beta_p(), 0.75);
    }

    #[test]
    fn exponents_half() {
        let s = scaling(0.5);
        assert_relative_eq!(s.beta_q(), 2.0);
        assert_relative_eq!(s.beta_f(), 2.0);
        assert_relative_eq!(s.beta_p(), 1.5);
    }

    #[test]
    fn exponents_cubic_q() {
        let mut spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        spec.regular = CostFn::PowerNorm {
            coef: 1.0,
            exponent: 3.0,
        };
        spec.zeta_q = 3.0;
        let s = derive_exponents(0.25, &spec).unwrap();
        assert_relative_eq!(s.beta_q(), 1.25);
    }

    #[test]
    fn exponent_ratio_identities() {
        for beta in [0.1, 0.25, 1.0 / 3.0, 0.5] {
            let s = scaling(beta);
            let r1 = s.beta_f() / (s.zeta_d + 2.0 - s.zeta_f);
            let r2 = s.beta_p() / (s.zeta_d + 2.0 - s.zeta_p);
            let r3 = s.beta_q() / (s.zeta_d + s.zeta_q);
            assert!((r1 - beta).abs() <= 1e-14 * beta);
            assert!((r2 - beta).abs() <= 1e-14 * beta);
            assert!((r3 - beta).abs() <= 1e-14 * beta);
        }
    }

    #[test]
    fn derive_rejects_nonpositive_beta() {
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(derive_exponents(0.0, &spec).is_err());
        assert!(derive_exponents(-1.0, &spec).is_err());
    }

    fn flat_path(grid: TimeGrid, value: f64, eps: f64) -> ControlledPath {
        let n = grid.n_steps;
        path_for_tests(
            grid,
            eps,
            1.0,
            vec![value; n + 1],
            vec![0.0; n],
            Vec::new(),
            Vec::new(),
        )
    }

    #[test]
    fn eval_zero_path() {
        let grid = TimeGrid::from_steps(0.0, 1.0, 16).unwrap();
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let s = scaling(0.25);
        let b = eval_cost(&flat_path(grid, 0.0, 0.3), &spec, &s, 0.3).unwrap();
        assert_eq!(b.total(), 0.0);
    }

    #[test]
    fn eval_constant_deviation() {
        // D(x)=x², r≡1, deviation fixed at xbar: deviation term = xbar²·T
        let grid = TimeGrid::from_steps(0.0, 2.0, 64).unwrap();
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let s = scaling(0.25);
        let b = eval_cost(&flat_path(grid, 1.5, 1.0), &spec, &s, 1.0).unwrap();
        assert_relative_eq!(b.deviation_term, 1.5 * 1.5 * 2.0, epsilon = 1e-10);
        assert_eq!(b.fixed_term, 0.0);
    }

    #[test]
    fn eval_single_jump_fixed_term() {
        let grid = TimeGrid::from_steps(0.0, 1.0, 8).unwrap();
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        let s = scaling(0.25);
        let eps = 0.2;
        let mut p = flat_path(grid, 0.0, eps);
        p.jumps.push(JumpEvent {
            time: 0.5,
            step: 4,
            pre_jump: DVector::from_vec(vec![1.0]),
            jump: DVector::from_vec(vec![-1.0]),
        });
        let b = eval_cost(&p, &spec, &s, eps).unwrap();
        assert_relative_eq!(b.fixed_term, eps.powf(s.beta_f()), epsilon = 1e-12);
    }

    #[test]
    fn eval_singular_term() {
        let grid = TimeGrid::from_steps(0.0, 1.0, 8).unwrap();
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let s = scaling(0.25);
        let eps = 0.5;
        let mut p = flat_path(grid, 0.0, eps);
        p.reflections.push(ReflectionEvent {
            time: 0.25,
            step: 2,
            point: DVector::from_vec(vec![1.0]),
            gamma: DVector::from_vec(vec![-1.0]),
            dphi: 0.75,
        });
        let b = eval_cost(&p, &spec, &s, eps).unwrap();
        assert_relative_eq!(
            b.proportional_term,
            eps.powf(s.beta_p()) * 0.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn eval_additive_over_time_split() {
        // run the same synthetic data as one grid vs two halves
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let s = scaling(0.25);
        let full = TimeGrid::from_steps(0.0, 1.0, 10).unwrap();
        let states: Vec<f64> = (0..=10).map(|i| (i as f64 * 0.37).sin()).collect();
        let controls: Vec<f64> = (0..10).map(|i| (i as f64 * 0.9).cos()).collect();
        let p = path_for_tests(
            full,
            1.0,
            1.0,
            states.clone(),
            controls.clone(),
            vec![],
            vec![],
        );
        let whole = eval_cost(&p, &spec, &s, 1.0).unwrap();

        let first = TimeGrid::from_steps(0.0, 0.5, 5).unwrap();
        let second = TimeGrid::from_steps(0.5, 1.0, 5).unwrap();
        let p1 = path_for_tests(
            first,
            1.0,
            1.0,
            states[..6].to_vec(),
            controls[..5].to_vec(),
            vec![],
            vec![],
        );
        let p2 = path_for_tests(
            second,
            1.0,
            1.0,
            states[5..].to_vec(),
            controls[5..].to_vec(),
            vec![],
            vec![],
        );
        let b1 = eval_cost(&p1, &spec, &s, 1.0).unwrap();
        let b2 = eval_cost(&p2, &spec, &s, 1.0).unwrap();
        assert_relative_eq!(whole.total(), b1.total() + b2.total(), epsilon = 1e-12);
    }

    #[test]
    fn renormalize_examples() {
        let s = scaling(0.25);
        let b = CostBreakdown {
            deviation_term: 1.0,
            regular_term: 2.0,
            fixed_term: 3.0,
            proportional_term: 4.0,
        };
        // eps = 1 leaves everything unchanged
        let r = renormalize(&b, 1.0, &s).unwrap();
        assert_eq!(r, b);
        // zeta_d=2, beta=1/4, eps=1e-2: multiplier eps^{-1/2} = 10
        let r = renormalize(&b, 1e-2, &s).unwrap();
        assert_relative_eq!(r.deviation_term, 10.0, epsilon = 1e-12);
        assert_relative_eq!(r.total(), 100.0, epsilon = 1e-10);
        // zeros stay zeros
        let z = renormalize(&CostBreakdown::default(), 0.5, &s).unwrap();
        assert_eq!(z.total(), 0.0);
    }

    #[test]
    fn renormalize_is_linear() {
        let s = scaling(0.3);
        let b = CostBreakdown {
            deviation_term: 1.0,
            regular_term: 0.5,
            fixed_term: 0.25,
            proportional_term: 2.0,
        };
        let c = 3.7;
        let lhs = renormalize(&b.scaled(c), 0.11, &s).unwrap();
        let rhs = renormalize(&b, 0.11, &s).unwrap().scaled(c);
        assert_relative_eq!(lhs.total(), rhs.total(), epsilon = 1e-12);
    }

    #[test]
    fn homogeneity_of_builtins() {
        let spec = CostSpec::quadratic_1d(1.3, 0.7, 2.0, 1.5, 1.0, 1.0, 1.0, 1.0);
        let err = check_homogeneity(&spec, &homogeneity_samples(1));
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn homogeneity_counting_exact() {
        let f = CostFn::Counting {
            weights: vec![1.0, 2.0],
        };
        let x = vec![0.5, 0.0];
        assert_eq!(f.eval(&x), 1.0);
        let scaled: Vec<f64> = x.iter().map(|v| v * 0.1).collect();
        assert_eq!(f.eval(&scaled), f.eval(&x));
    }

    #[test]
    fn eval_rejects_mismatched_path() {
        let grid = TimeGrid::from_steps(0.0, 1.0, 8).unwrap();
        let spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let s = scaling(0.25);
        // 8-step grid but only 4 states / 3 controls
        let p = path_for_tests(grid, 1.0, 1.0, vec![0.0; 4], vec![0.0; 3], vec![], vec![]);
        assert!(matches!(
            eval_cost(&p, &spec, &s, 1.0),
            Err(crate::Error::PathMismatch(_))
        ));
    }

    #[test]
    fn homogeneity_detects_violation() {
        let mut spec = CostSpec::quadratic_1d(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        spec.deviation = CostFn::ShiftedQuadratic {
            matrix: SymMat::scalar(1.0),
            shift: 1.0,
        };
        let err = check_homogeneity(&spec, &homogeneity_samples(1));
        assert!(err > 0.1, "violation should be order 1, got {err}");
    }
}
