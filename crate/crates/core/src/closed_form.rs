//! Exact solvers for the explicitly solvable instances.
//!
//! - the quadratic matrix equation
//!   `2(a^{1/2}Ba^{1/2})² + a^{1/2}Ba^{1/2}·Tr(a^{1/2}Ba^{1/2}) = 2a^{1/2}Σ^D a^{1/2}`
//!   whose unique SPD solution `B` gives the impulse lower bound
//!   `I = Tr(aB)·√(rk)` attained on the domain `{x : xᵀBx < 2√(k/r)}`;
//! - the LQ feedback problem: the unique SPD `G` with `G Q⁻¹ G = r·l·D`,
//!   feedback gain `Σ_fb = (1/l) Q⁻¹ G`, value `I^V = Tr(aG)`, and the OU
//!   stationary covariance `Σ_fb C + C Σ_fbᵀ = a`;
//! - the piecewise verification function `w(x) = xᵀBx − (xᵀBx)²/4` clipped
//!   at 1, whose generator identity pins `∫ xᵀΣ^D x dπ + ν(∂G) = Tr(aB)`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{
    check_spd, eigenvalues_have_positive_real_part, lyapunov_solve, op_norm_sym, sym_inv_sqrt,
    sym_sqrt,
};
use crate::stationary::OccupationPair;
use crate::{Error, Result};

/// Solution of the quadratic matrix equation.
#[derive(Debug, Clone)]
pub struct MatrixEquationSolution {
    pub b: DMatrix<f64>,
    /// Operator-norm residual of the equation evaluated at `b`.
    pub residual: f64,
    /// `Tr(aB)`, the unweighted lower-bound value.
    pub trace_ab: f64,
}

/// Solves `2(a½Ba½)² + a½Ba½·Tr(a½Ba½) = 2a½Σ^D a½` for SPD `B`.
///
/// With `S = a½Σ^D a½ = O diag(λ) Oᵀ`, the transformed unknown
/// `M = a½Ba½` shares the eigenbasis and its eigenvalues solve
/// `2m_i² + m_i·t = 2λ_i` with `t = Σ m_j`, i.e.
/// `m_i(t) = (−t + √(t² + 16λ_i))/4`; the scalar fixed point
/// `t = Σ m_i(t)` is bracketed in `[0, Σ√λ_i]` and found by bisection.
pub fn solve_matrix_b(a: &DMatrix<f64>, sigma_d: &DMatrix<f64>) -> Result<MatrixEquationSolution> {
    check_spd(a, "a")?;
    let scale = op_norm_sym(sigma_d);
    if scale == 0.0 {
        // Σ^D → 0 limit: B → 0
        let d = a.nrows();
        return Ok(MatrixEquationSolution {
            b: DMatrix::zeros(d, d),
            residual: 0.0,
            trace_ab: 0.0,
        });
    }
    if !crate::linalg::is_symmetric(sigma_d, 1e-9)
        || sigma_d
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .any(|&l| l < -1e-12 * scale)
    {
        return Err(Error::NotPositiveDefinite(
            "sigma_d must be symmetric PSD".into(),
        ));
    }
    let a_half = sym_sqrt(a)?;
    let a_inv_half = sym_inv_sqrt(a)?;
    let s = &a_half * sigma_d * &a_half;
    let eig = s.clone().symmetric_eigen();
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();

    let m_of = |t: f64| -> Vec<f64> {
        lambdas
            .iter()
            .map(|&l| (-t + (t * t + 16.0 * l).sqrt()) / 4.0)
            .collect()
    };
    let g = |t: f64| -> f64 { m_of(t).iter().sum::<f64>() - t };
    let mut lo = 0.0;
    let mut hi = lambdas.iter().map(|l| l.sqrt()).sum::<f64>();
    if g(lo) < 0.0 || g(hi) > 1e-12 * (1.0 + hi) {
        return Err(Error::Unsupported(
            "fixed point not bracketed; should be impossible for SPD inputs".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 * (1.0 + hi) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let m_diag = DVector::from_vec(m_of(t));
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&m_diag) * eig.eigenvectors.transpose();
    let b = &a_inv_half * &m * &a_inv_half;

    // direct residual of the original equation
    let aba = &a_half * &b * &a_half;
    let resid_mat = 2.0 * &aba * &aba + &aba * aba.trace() - 2.0 * &s;
    let residual = op_norm_sym(&resid_mat) / (1.0 + op_norm_sym(&s));
    let trace_ab = (a * &b).trace();
    Ok(MatrixEquationSolution {
        b,
        residual,
        trace_ab,
    })
}

/// Impulse lower bound with weights: value, optimal domain, and the matrix
/// solution behind them.
#[derive(Debug, Clone)]
pub struct ImpulseLowerBound {
    /// `I = Tr(aB)·√(rk)`
    pub i_value: f64,
    /// `M` with optimal domain `{x : xᵀMx < 1}`, i.e. `M = B / (2√(k/r))`.
    pub domain_matrix: DMatrix<f64>,
    pub solution: MatrixEquationSolution,
}

/// `I(a, r, k) = Tr(aB)√(rk)`, attained by hitting the moving ellipsoid
/// `G = {x : xᵀBx < 2√(k/r)}` and jumping to the center.
pub fn impulse_lower_bound(
    a: &DMatrix<f64>,
    sigma_d: &DMatrix<f64>,
    r: f64,
    k: f64,
) -> Result<ImpulseLowerBound> {
    if !(r > 0.0 && k > 0.0) {
        return Err(Error::InvalidSpec("weights r, k must be positive".into()));
    }
    let solution = solve_matrix_b(a, sigma_d)?;
    let i_value = solution.trace_ab * (r * k).sqrt();
    let threshold = 2.0 * (k / r).sqrt();
    let domain_matrix = &solution.b / threshold;
    Ok(ImpulseLowerBound {
        i_value,
        domain_matrix,
        solution,
    })
}

/// `w(x) = xᵀBx − (xᵀBx)²/4` for `xᵀBx < 2`, clipped at 1 outside.
pub fn w_function(b: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let q = (b * x).dot(x);
    if q < 2.0 {
        q - q * q / 4.0
    } else {
        1.0
    }
}

/// Analytic `½ Σ a_ij ∂²_ij w`: `Tr(aB)(1 − xᵀBx/2) − xᵀBaBx` inside,
/// 0 outside.
pub fn w_generator(b: &DMatrix<f64>, a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let q = (b * x).dot(x);
    if q < 2.0 {
        let bab = b * a * b;
        (a * b).trace() * (1.0 - q / 2.0) - (&bab * x).dot(x)
    } else {
        0.0
    }
}

/// Verification of the stationary identity
/// `∫ xᵀΣ^D x dπ + ν(∂G) = Tr(aB)` against a computed occupation pair, plus
/// a finite-difference probe of the generator identity for `w`.
#[derive(Debug, Clone)]
pub struct WIdentityReport {
    /// `|∫ xᵀΣ^D x dπ + ν(∂G) − Tr(aB)|`
    pub defect: f64,
    /// Max |FD generator − analytic generator| over probe points.
    pub max_generator_mismatch: f64,
    pub trace_ab: f64,
}

pub fn verify_w_identity(
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sigma_d: &DMatrix<f64>,
    pair: &OccupationPair,
) -> WIdentityReport {
    let trace_ab = (a * b).trace();
    let d_mean = pair.interior.integrate(|x| {
        let xv = DVector::from_column_slice(x);
        (sigma_d * &xv).dot(&xv)
    });
    let defect = (d_mean + pair.total_boundary_mass - trace_ab).abs();

    // central finite differences of w against the closed-form generator at
    // interior probe points away from the C² kink at x'Bx = 2
    let d = b.nrows();
    let fd_h = 1e-5;
    let mut max_generator_mismatch: f64 = 0.0;
    let probes = probe_points(b, d);
    for x in probes {
        let q = (b * &x).dot(&x);
        if (q - 2.0).abs() < 0.2 {
            continue;
        }
        let mut fd = 0.0;
        for i in 0..d {
            for j in 0..d {
                if a[(i, j)] == 0.0 {
                    continue;
                }
                let mut xpp = x.clone();
                let mut xpm = x.clone();
                let mut xmp = x.clone();
                let mut xmm = x.clone();
                xpp[i] += fd_h;
                xpp[j] += fd_h;
                xpm[i] += fd_h;
                xpm[j] -= fd_h;
                xmp[i] -= fd_h;
                xmp[j] += fd_h;
                xmm[i] -= fd_h;
                xmm[j] -= fd_h;
                let second = (w_function(b, &xpp) - w_function(b, &xpm) - w_function(b, &xmp)
                    + w_function(b, &xmm))
                    / (4.0 * fd_h * fd_h);
                fd += 0.5 * a[(i, j)] * second;
            }
        }
        let mismatch = (fd - w_generator(b, a, &x)).abs();
        max_generator_mismatch = max_generator_mismatch.max(mismatch);
    }
    WIdentityReport {
        defect,
        max_generator_mismatch,
        trace_ab,
    }
}

fn probe_points(b: &DMatrix<f64>, d: usize) -> Vec<DVector<f64>> {
    // origin plus a few points inside and outside the w-kink
    let mut out = vec![DVector::zeros(d)];
    let scale = 1.0 / op_norm_sym(b).max(1e-12).sqrt();
    for k in 1..=4 {
        let r = scale * (0.3 * k as f64);
        for i in 0..d {
            let mut x = DVector::zeros(d);
            x[i] = r;
            out.push(x);
        }
        let mut diag = DVector::from_element(d, r / (d as f64).sqrt());
        if k % 2 == 0 {
            diag[0] = -diag[0];
        }
        out.push(diag);
    }
    for i in 0..d {
        let mut x = DVector::zeros(d);
        x[i] = 3.0 * scale;
        out.push(x);
    }
    out
}

/// LQ feedback solution.
#[derive(Debug, Clone)]
pub struct LQSolution {
    /// The unique SPD solution of `G Q⁻¹ G = r·l·D` (0 when r·l = 0).
    pub g: DMatrix<f64>,
    /// Feedback gain `Σ_fb = (1/l) Q⁻¹ G`; the policy is `u(x) = -Σ_fb x`.
    pub feedback: DMatrix<f64>,
    /// `I^V = Tr(aG)`.
    pub i_value: f64,
    /// Stationary covariance `C` of `dX = -Σ_fb X dt + √a dW`, when the
    /// feedback is stabilizing.
    pub stationary_covariance: Option<DMatrix<f64>>,
    /// Set when the solution is non-stabilizing (`r = 0`).
    pub degenerate: bool,
    /// `‖G Q⁻¹ G − rlD‖` (operator norm, relative).
    pub residual: f64,
}

/// Solves the LQ problem for quadratic costs `D, Q` (SPD) and weights
/// `r ≥ 0, l > 0`: `G = Q½·sqrtm(rl·Q^{-½} D Q^{-½})·Q½`.
pub fn solve_lq(
    a: &DMatrix<f64>,
    d_mat: &DMatrix<f64>,
    q_mat: &DMatrix<f64>,
    r: f64,
    l: f64,
) -> Result<LQSolution> {
    check_spd(a, "a")?;
    check_spd(d_mat, "D")?;
    check_spd(q_mat, "Q")?;
    if !(l > 0.0) || r < 0.0 {
        return Err(Error::InvalidSpec("solve_lq needs l > 0 and r >= 0".into()));
    }
    let q_half = sym_sqrt(q_mat)?;
    let q_inv_half = sym_inv_sqrt(q_mat)?;
    let inner = &q_inv_half * d_mat * &q_inv_half * (r * l);
    let g = &q_half * sym_sqrt(&inner)? * &q_half;
    let q_inv = &q_inv_half * &q_inv_half;
    let feedback = &q_inv * &g / l;
    let i_value = (a * &g).trace();
    let resid_mat = &g * &q_inv * &g - d_mat * (r * l);
    let residual = op_norm_sym(&resid_mat) / (1.0 + op_norm_sym(d_mat) * r * l);
    let degenerate = r == 0.0;
    let stationary_covariance = if !degenerate && eigenvalues_have_positive_real_part(&feedback) {
        Some(ou_stationary_covariance(&feedback, a)?)
    } else {
        None
    };
    Ok(LQSolution {
        g,
        feedback,
        i_value,
        stationary_covariance,
        degenerate,
        residual,
    })
}

/// Stationary covariance of `dX = -Σ_fb X dt + √a dW`:
/// solves `Σ_fb C + C Σ_fbᵀ = a` (in d=1 this is `a/(2Σ)`).
pub fn ou_stationary_covariance(sigma_fb: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !eigenvalues_have_positive_real_part(sigma_fb) {
        return Err(Error::Unsupported(
            "feedback matrix must have eigenvalues with positive real part".into(),
        ));
    }
    lyapunov_solve(sigma_fb, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn eye(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    #[test]
    fn scalar_b_unit() {
        // d=1, a=1, Σ^D=1: 3B² = 2, B = sqrt(2/3)
        let sol = solve_matrix_b(&eye(1), &eye(1)).unwrap();
        assert_relative_eq!(sol.b[(0, 0)], (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert!(sol.residual < 1e-10);
        assert_relative_eq!(sol.trace_ab, (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn scalar_b_a_four() {
        // d=1, a=4, Σ^D=1: M = sqrt(8/3), B = M/4, Tr(aB) = sqrt(8/3)
        let a = DMatrix::from_element(1, 1, 4.0);
        let sol = solve_matrix_b(&a, &eye(1)).unwrap();
        let m = (8.0f64 / 3.0).sqrt();
        assert_relative_eq!(sol.b[(0, 0)], m / 4.0, epsilon = 1e-12);
        assert_relative_eq!(sol.trace_ab, m, epsilon = 1e-12);
    }

    #[test]
    fn b_zero_rhs() {
        let sol = solve_matrix_b(&eye(2), &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(sol.trace_ab, 0.0);
        assert!(sol.residual < 1e-14);
    }

    #[test]
    fn b_scaling_covariance_1d() {
        // scalar reduction: B(c·Σ) = sqrt(c)·B(Σ)
        let b1 = solve_matrix_b(&eye(1), &eye(1)).unwrap().b[(0, 0)];
        let s4 = DMatrix::from_element(1, 1, 4.0);
        let b4 = solve_matrix_b(&eye(1), &s4).unwrap().b[(0, 0)];
        assert_relative_eq!(b4, 2.0 * b1, epsilon = 1e-12);
    }

    #[test]
    fn b_residual_random_spd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for trial in 0..100 {
            let d = 1 + trial % 3;
            // condition number <= 1e3
            let rand_spd = |rng: &mut rand_chacha::ChaCha8Rng| {
                let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                let q = g.qr().q();
                let lam = DVector::from_fn(d, |_, _| {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    1e-1 * 1000.0f64.powf(u)
                });
                &q * DMatrix::from_diagonal(&lam) * q.transpose()
            };
            let a = rand_spd(&mut rng);
            let sd = rand_spd(&mut rng);
            let sol = solve_matrix_b(&a, &sd).unwrap();
            assert!(
                sol.residual < 1e-10,
                "trial {trial}: residual {}",
                sol.residual
            );
            // B is SPD
            assert!(sol
                .b
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .all(|&l| l > 0.0));
        }
    }

    #[test]
    fn lower_bound_and_domain() {
        // a=1, r=1, k=1, d=1: I = sqrt(2/3), domain half-width 6^{1/4}
        let lb = impulse_lower_bound(&eye(1), &eye(1), 1.0, 1.0).unwrap();
        assert_relative_eq!(lb.i_value, (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        let half_width = 1.0 / lb.domain_matrix[(0, 0)].sqrt();
        assert_relative_eq!(half_width, 6.0f64.powf(0.25), epsilon = 1e-10);

        // k → 4k: I doubles? no — I scales by 2, half-width by sqrt(2)
        let lb4 = impulse_lower_bound(&eye(1), &eye(1), 1.0, 4.0).unwrap();
        assert_relative_eq!(lb4.i_value, 2.0 * lb.i_value, epsilon = 1e-12);
        let hw4 = 1.0 / lb4.domain_matrix[(0, 0)].sqrt();
        assert_relative_eq!(hw4, half_width * 2.0f64.sqrt(), epsilon = 1e-10);

        // r = k: threshold x'Bx < 2 exactly
        let lb_rk = impulse_lower_bound(&eye(1), &eye(1), 3.0, 3.0).unwrap();
        let m = lb_rk.domain_matrix[(0, 0)];
        assert_relative_eq!(m, lb_rk.solution.b[(0, 0)] / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn w_generator_identity_points() {
        // at x=0: ½ a w'' = Tr(aB); beyond the kink the generator vanishes
        let sol = solve_matrix_b(&eye(1), &eye(1)).unwrap();
        let g0 = w_generator(&sol.b, &eye(1), &DVector::zeros(1));
        assert_relative_eq!(g0, sol.trace_ab, epsilon = 1e-12);
        let far = DVector::from_vec(vec![10.0]);
        assert_eq!(w_generator(&sol.b, &eye(1), &far), 0.0);
        assert_eq!(w_function(&sol.b, &far), 1.0);
    }

    #[test]
    fn lq_scalar_unit() {
        let sol = solve_lq(&eye(1), &eye(1), &eye(1), 1.0, 1.0).unwrap();
        assert_relative_eq!(sol.g[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.feedback[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.i_value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            sol.stationary_covariance.unwrap()[(0, 0)],
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lq_scalar_d_four() {
        // D=4: G=2, Σ_fb=2, I=2, C=1/4; r·E[Dx²]+l·E[Qu²] = 4/4 + 4/4 = 2
        let d4 = DMatrix::from_element(1, 1, 4.0);
        let sol = solve_lq(&eye(1), &d4, &eye(1), 1.0, 1.0).unwrap();
        assert_relative_eq!(sol.g[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(sol.feedback[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(sol.i_value, 2.0, epsilon = 1e-12);
        let c = sol.stationary_covariance.unwrap()[(0, 0)];
        assert_relative_eq!(c, 0.25, epsilon = 1e-12);
        let direct = 1.0 * 4.0 * c + 1.0 * (2.0f64 * 2.0) * c;
        assert_relative_eq!(direct, sol.i_value, epsilon = 1e-12);
    }

    #[test]
    fn lq_degenerate_r_zero() {
        let sol = solve_lq(&eye(1), &eye(1), &eye(1), 0.0, 1.0).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.g[(0, 0)], 0.0);
        assert!(sol.stationary_covariance.is_none());
    }

    #[test]
    fn lq_residual_and_gain_square() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = 2;
            let rand_spd = |rng: &mut rand_chacha::ChaCha8Rng| {
                let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                &g * g.transpose() + eye(d) * 0.2
            };
            let a = rand_spd(&mut rng);
            let dm = rand_spd(&mut rng);
            let qm = rand_spd(&mut rng);
            let (r, l) = (rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0));
            let sol = solve_lq(&a, &dm, &qm, r, l).unwrap();
            assert!(sol.residual < 1e-10, "residual {}", sol.residual);
            // Σ_fb² = (r/l) Q⁻¹ D
            let lhs = &sol.feedback * &sol.feedback;
            let rhs = qm.clone().try_inverse().unwrap() * &dm * (r / l);
            assert!((lhs - rhs).amax() < 1e-8);
        }
    }

    #[test]
    fn ou_covariance_examples() {
        let c = ou_stationary_covariance(&eye(1), &eye(1)).unwrap();
        assert_relative_eq!(c[(0, 0)], 0.5, epsilon = 1e-12);
        let two = DMatrix::from_element(1, 1, 2.0);
        let c = ou_stationary_covariance(&two, &eye(1)).unwrap();
        assert_relative_eq!(c[(0, 0)], 0.25, epsilon = 1e-12);
        let c = ou_stationary_covariance(&eye(2), &eye(2)).unwrap();
        assert_relative_eq!(c[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(c[(1, 1)], 0.5, epsilon = 1e-12);
        // non-stabilizing rejected
        let neg = DMatrix::from_element(1, 1, -1.0);
        assert!(ou_stationary_covariance(&neg, &eye(1)).is_err());
    }
}
