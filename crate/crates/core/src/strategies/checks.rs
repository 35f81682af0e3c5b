//! Admissibility certificates for the three strategy families:
//! strict potential decrease across jumps, strict inward reflection, and the
//! Lyapunov drift condition for regular policies. All are sampled
//! numerically on the boundary / a ball and reported with their worst value.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ControlledPath, ImpulseTriplet, RegularPolicy, SingularTriplet};

/// Outcome of a sampled admissibility check.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub pass: bool,
    /// The binding sampled value: minimum potential decrement for jumps,
    /// maximum `⟨∇V, γ⟩` for reflection, maximum Lyapunov surplus for
    /// regular policies.
    pub worst: f64,
    pub n_samples: usize,
    pub what: &'static str,
}

fn sample_times(horizon: f64, constant: bool) -> Vec<f64> {
    if constant {
        vec![0.0]
    } else {
        (0..=8).map(|i| horizon * i as f64 / 8.0).collect()
    }
}

/// Samples `V(x) - V(x + ξ_t(x))` on `∂G_t`; admissible iff the decrement is
/// strictly positive everywhere sampled.
pub fn check_admissibility_impulse(
    triplet: &ImpulseTriplet,
    horizon: f64,
    n_samples: usize,
) -> AdmissibilityReport {
    let constant = triplet.domain.is_constant() && triplet.jump.is_constant();
    let mut min_decrement = f64::INFINITY;
    let mut count = 0;
    for t in sample_times(horizon, constant) {
        for x in triplet.domain.boundary_points(t, n_samples) {
            let jumped = &x + triplet.jump.xi(t, &x);
            let dec = triplet.potential.value(&x) - triplet.potential.value(&jumped);
            min_decrement = min_decrement.min(dec);
            count += 1;
        }
    }
    AdmissibilityReport {
        pass: min_decrement > 0.0,
        worst: min_decrement,
        n_samples: count,
        what: "min potential decrement over boundary jumps",
    }
}

/// Samples `⟨∇V(x), γ(x)⟩` on `∂G_t`; admissible iff strictly negative.
pub fn check_admissibility_singular(
    triplet: &SingularTriplet,
    horizon: f64,
    n_samples: usize,
) -> AdmissibilityReport {
    let constant = triplet.domain.is_constant();
    let mut max_inner = f64::NEG_INFINITY;
    let mut count = 0;
    for t in sample_times(horizon, constant) {
        for x in triplet.domain.boundary_points(t, n_samples) {
            let gamma = triplet.direction.gamma(&triplet.domain, t, &x);
            let inner = triplet.potential.gradient(&x).dot(&gamma);
            max_inner = max_inner.max(inner);
            count += 1;
        }
    }
    AdmissibilityReport {
        pass: max_inner < 0.0,
        worst: max_inner,
        n_samples: count,
        what: "max <grad V, gamma> over the boundary",
    }
}

/// Samples the Lyapunov surplus
/// `½ Σ a_ij ∂²_ij V + U·∇V - θ + 2Θ V` on a ball; admissible iff it stays
/// ≤ 0 (up to rounding) everywhere sampled.
pub fn check_lyapunov_regular(
    policy: &RegularPolicy,
    a: &DMatrix<f64>,
    n_samples: usize,
    radius: f64,
) -> AdmissibilityReport {
    let d = a.nrows();
    let hess = policy.lyapunov.hessian(d);
    let diffusion_part = 0.5 * (a * &hess).trace();
    let mut rng = ChaCha8Rng::seed_from_u64(0x17a_u64);
    let mut max_surplus = f64::NEG_INFINITY;
    let mut count = 0;
    let mut consider = |x: DVector<f64>| {
        let u = policy.speed.eval(0.0, &x);
        let surplus = diffusion_part + u.dot(&policy.lyapunov.gradient(&x)) - policy.theta
            + 2.0 * policy.big_theta * policy.lyapunov.value(&x);
        if surplus > max_surplus {
            max_surplus = surplus;
        }
    };
    if d == 1 {
        let n = n_samples.max(3);
        for i in 0..n {
            let x = -radius + 2.0 * radius * i as f64 / (n - 1) as f64;
            consider(DVector::from_vec(vec![x]));
            count += 1;
        }
    } else {
        for _ in 0..n_samples.max(8) {
            let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
            let x = &v * (r / v.norm());
            consider(x);
            count += 1;
        }
        // the origin is often the binding point
        consider(DVector::zeros(d));
        count += 1;
    }
    AdmissibilityReport {
        pass: max_surplus <= 1e-9,
        worst: max_surplus,
        n_samples: count,
        what: "max Lyapunov surplus A^a_U V - theta + 2 Theta V",
    }
}

/// Scaled jump rates `N^ε_T · ε^{2β} / T` averaged per ε value, returned in
/// decreasing ε order. The proof-side moment bound says these stay bounded
/// as ε → 0; for an interval domain they converge to `a / L²`.
pub fn jump_count_diagnostic(paths: &[ControlledPath]) -> Vec<(f64, f64)> {
    let mut groups: Vec<(f64, f64, usize)> = Vec::new();
    for p in paths {
        let rate = p.jumps.len() as f64 * p.scale * p.scale / p.grid.span();
        match groups
            .iter_mut()
            .find(|(eps, _, _)| eps.to_bits() == p.eps.to_bits())
        {
            Some(g) => {
                g.1 += rate;
                g.2 += 1;
            }
            None => groups.push((p.eps, rate, 1)),
        }
    }
    groups.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    groups
        .into_iter()
        .map(|(eps, sum, n)| (eps, sum / n as f64))
        .collect()
}
