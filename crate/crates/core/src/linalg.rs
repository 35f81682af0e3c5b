//! Small dense linear-algebra helpers on symmetric matrices.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` at the small dimensions
//! of the tracking problem (d ≤ 4 in practice). Matrix functions are computed
//! through symmetric eigendecompositions only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Reconstruction tolerance for symmetric matrix functions.
pub const SYM_FUNC_TOL: f64 = 1e-12;

/// A symmetric matrix that (de)serializes as a plain list of rows, so config
/// files stay hand-editable.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(pub DMatrix<f64>);

impl SymMat {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSpec("matrix rows must be square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        if !is_symmetric(&m, 1e-10) {
            return Err(Error::InvalidSpec("matrix must be symmetric".into()));
        }
        Ok(SymMat(m))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(DMatrix::identity(n, n))
    }

    pub fn scalar(v: f64) -> Self {
        SymMat(DMatrix::from_element(1, 1, v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

impl std::ops::Deref for SymMat {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.0.nrows())
            .map(|i| (0..self.0.ncols()).map(|j| self.0[(i, j)]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SymMat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Checks symmetry and strict positive definiteness (via eigenvalues).
pub fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !is_symmetric(m, 1e-9) {
        return Err(Error::NotPositiveDefinite(format!("{what} not symmetric")));
    }
    let eigs = m.clone().symmetric_eigenvalues();
    if eigs.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has a non-positive eigenvalue ({:.3e})",
            eigs.min()
        )));
    }
    Ok(())
}

fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let lambda = DVector::from_iterator(m.nrows(), eig.eigenvalues.iter().map(|&l| f(l)));
    q * DMatrix::from_diagonal(&lambda) * q.transpose()
}

/// Symmetric square root. Eigenvalues below `-SYM_FUNC_TOL·‖m‖` are rejected;
/// slightly negative ones (roundoff on semidefinite input) are clamped to 0.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = 1.0 + m.amax();
    let eigs = m.clone().symmetric_eigenvalues();
    if eigs.iter().any(|&l| l < -SYM_FUNC_TOL * scale) {
        return Err(Error::NotPositiveDefinite(
            "square root of an indefinite matrix".into(),
        ));
    }
    let s = sym_apply(m, |l| l.max(0.0).sqrt());
    let recon = &s * &s - m;
    if recon.amax() > 1e-9 * scale {
        return Err(Error::NotPositiveDefinite(format!(
            "square-root reconstruction residual {:.3e}",
            recon.amax()
        )));
    }
    Ok(s)
}

/// Symmetric inverse square root; requires strictly positive eigenvalues.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m, "inverse-square-root argument")?;
    Ok(sym_apply(m, |l| 1.0 / l.sqrt()))
}

/// Operator (spectral) norm of a symmetric matrix.
pub fn op_norm_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0, |acc, &l| acc.max(l.abs()))
}

/// Solves the continuous Lyapunov equation `F C + C Fᵀ = Q` by vectorizing
/// to the d²×d² Kronecker system. Fine at the small dimensions used here.
pub fn lyapunov_solve(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = f.nrows();
    if f.ncols() != d || q.nrows() != d || q.ncols() != d {
        return Err(Error::InvalidSpec("lyapunov: dimension mismatch".into()));
    }
    // vec is column-stacking: vec(FC + CFᵀ) = (I ⊗ F + F ⊗ I) vec(C).
    let eye = DMatrix::<f64>::identity(d, d);
    let k = eye.kronecker(f) + f.kronecker(&eye);
    let rhs = DVector::from_iterator(d * d, q.iter().copied());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Unsupported("lyapunov system is singular".into()))?;
    let mut c = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            c[(i, j)] = sol[j * d + i];
        }
    }
    // symmetrize away roundoff
    let ct = c.transpose();
    Ok((c + ct) * 0.5)
}

/// `true` if every eigenvalue of `m` has strictly positive real part.
pub fn eigenvalues_have_positive_real_part(m: &DMatrix<f64>) -> bool {
    m.clone().complex_eigenvalues().iter().all(|l| l.re > 0.0)
}
