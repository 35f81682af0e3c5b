//! Target process simulation: `dX°_t = b_t dt + √a_t dW_t`, `X°_0 = 0`.
//!
//! Coefficients are deterministic functions of time plus, optionally, a
//! simulated scalar Ornstein-Uhlenbeck factor that makes the diffusion
//! stochastic and adapted. Sampling is explicitly seeded (ChaCha8), so a
//! `(model, grid, seed)` triple reproduces a path bit-exactly and
//! replications can run in parallel on disjoint seeds.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::SymMat;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Time grid
// ---------------------------------------------------------------------------

/// Uniform simulation grid on `[t_start, t_end]` with `n_steps` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Grid from a requested step size; `n_steps = round(span/dt)`.
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_end > t_start) {
            return Err(Error::InvalidGrid("t_end must exceed t_start".into()));
        }
        let n_steps = ((t_end - t_start) / dt).round() as usize;
        if n_steps == 0 {
            return Err(Error::InvalidGrid("grid has no steps".into()));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            dt,
            n_steps,
        })
    }

    /// Grid with an exact number of steps; `dt = span / n_steps`.
    pub fn from_steps(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be positive".into()));
        }
        if !(t_end > t_start) {
            return Err(Error::InvalidGrid("t_end must exceed t_start".into()));
        }
        let dt = (t_end - t_start) / n_steps as f64;
        Ok(TimeGrid {
            t_start,
            t_end,
            dt,
            n_steps,
        })
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Grid points `t_0 .. t_n` (n_steps + 1 values).
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.t(i))
    }
}

// ---------------------------------------------------------------------------
// Coefficient specifications
// ---------------------------------------------------------------------------

/// Deterministic scalar function of time used for weights, domain sizes and
/// coefficient ramps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// Linear ramp from `from` at t=0 to `to` at `t_end`, constant after.
    Ramp {
        from: f64,
        to: f64,
        t_end: f64,
    },
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Ramp { from, to, t_end } => {
                let s = (t / t_end).clamp(0.0, 1.0);
                from + (to - from) * s
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScalarFn::Constant { .. })
    }
}

/// Symmetric-matrix-valued function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixFn {
    Constant {
        value: SymMat,
    },
    /// `scale(t) · base`
    Scaled {
        base: SymMat,
        scale: ScalarFn,
    },
}

impl MatrixFn {
    pub fn constant(value: SymMat) -> Self {
        MatrixFn::Constant { value }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self {
            MatrixFn::Constant { value } => value.0.clone(),
            MatrixFn::Scaled { base, scale } => &base.0 * scale.eval(t),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixFn::Constant { value } => value.dim(),
            MatrixFn::Scaled { base, .. } => base.dim(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixFn::Constant { .. })
    }
}

/// Drift coefficient `b_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    Zero,
    Constant { value: Vec<f64> },
}

impl DriftSpec {
    fn eval_into(&self, _t: f64, _factor: f64, out: &mut DVector<f64>) {
        match self {
            DriftSpec::Zero => out.fill(0.0),
            DriftSpec::Constant { value } => {
                for (o, v) in out.iter_mut().zip(value) {
                    *o = *v;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DriftSpec::Zero => true,
            DriftSpec::Constant { value } => value.iter().all(|&v| v == 0.0),
        }
    }
}

/// Diffusion coefficient `a_t` (symmetric positive definite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionSpec {
    Constant {
        matrix: SymMat,
    },
    /// `a_t = scale(t) · base`
    TimeScaled {
        base: SymMat,
        scale: ScalarFn,
    },
    /// `a_t = exp(f_t) · base` where `f` is the OU auxiliary factor.
    FactorScaled {
        base: SymMat,
    },
}

impl DiffusionSpec {
    pub fn eval(&self, t: f64, factor: f64) -> DMatrix<f64> {
        match self {
            DiffusionSpec::Constant { matrix } => matrix.0.clone(),
            DiffusionSpec::TimeScaled { base, scale } => &base.0 * scale.eval(t),
            DiffusionSpec::FactorScaled { base } => &base.0 * factor.exp(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DiffusionSpec::Constant { matrix } => matrix.dim(),
            DiffusionSpec::TimeScaled { base, .. } => base.dim(),
            DiffusionSpec::FactorScaled { base } => base.dim(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DiffusionSpec::Constant { .. })
    }
}

/// Scalar OU auxiliary factor `df = rate (mean - f) dt + vol dW^f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuFactorSpec {
    pub rate: f64,
    pub mean: f64,
    pub vol: f64,
    pub init: f64,
}

/// The target semimartingale `dX° = b_t dt + √a_t dW_t`, `X°_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub dim: usize,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub factor: Option<OuFactorSpec>,
}

impl TargetModel {
    /// Constant-coefficient model (the workhorse for the limit theorems).
    pub fn constant(drift: Vec<f64>, diffusion: SymMat) -> Result<Self> {
        let dim = diffusion.dim();
        if drift.len() != dim {
            return Err(Error::InvalidSpec(
                "drift/diffusion dimension mismatch".into(),
            ));
        }
        let model = TargetModel {
            dim,
            drift: if drift.iter().all(|&v| v == 0.0) {
                DriftSpec::Zero
            } else {
                DriftSpec::Constant { value: drift }
            },
            diffusion: DiffusionSpec::Constant { matrix: diffusion },
            factor: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// 1D Brownian target with variance rate `a` and drift `b`.
    pub fn scalar(b: f64, a: f64) -> Result<Self> {
        Self::constant(vec![b], SymMat::scalar(a))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        if self.diffusion.dim() != self.dim {
            return Err(Error::InvalidSpec("diffusion dimension mismatch".into()));
        }
        if let DriftSpec::Constant { value } = &self.drift {
            if value.len() != self.dim {
                return Err(Error::InvalidSpec("drift dimension mismatch".into()));
            }
        }
        if matches!(self.diffusion, DiffusionSpec::FactorScaled { .. }) && self.factor.is_none() {
            return Err(Error::InvalidSpec(
                "factor-scaled diffusion requires a factor spec".into(),
            ));
        }
        // positive definiteness at a few sample times (degenerate a ≡ 0 is
        // allowed for the deterministic test scenarios, so only symmetry is
        // mandatory; strictly negative eigenvalues are not)
        for &t in &[0.0, 0.5, 1.0] {
            let a = self
                .diffusion
                .eval(t, self.factor.as_ref().map_or(0.0, |f| f.init));
            let eigs = a.clone().symmetric_eigenvalues();
            if eigs.iter().any(|&l| l < -1e-12) {
                return Err(Error::NotPositiveDefinite(format!(
                    "diffusion at t={t} has negative eigenvalue"
                )));
            }
        }
        Ok(())
    }

    /// True when `(b_t, a_t)` do not depend on time or on the random factor.
    pub fn is_time_invariant(&self) -> bool {
        self.diffusion.is_constant()
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// A simulated target path on a grid.
#[derive(Debug, Clone)]
pub struct TargetPath {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Flat row-major states; `n_steps + 1` rows of length `dim`, row 0 = 0.
    pub values: Vec<f64>,
    /// Flat row-major Brownian increments; `n_steps` rows.
    pub brownian: Vec<f64>,
    /// Diffusion matrices evaluated at the left endpoints.
    pub diffusion_values: Vec<DMatrix<f64>>,
}

impl TargetPath {
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.grid.n_steps)
    }
}

/// d-dimensional Gaussian increments `ΔW_i ~ N(0, dt·I_d)` on a grid.
///
/// Identical `(grid, dim, seed)` reproduce the output bit-exactly.
pub fn brownian_increments(grid: &TimeGrid, dim: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if !(grid.dt > 0.0) {
        return Err(Error::InvalidGrid("dt must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = grid.dt.sqrt();
    Ok((0..grid.n_steps)
        .map(|_| {
            DVector::from_iterator(
                dim,
                (0..dim).map(|_| sqrt_dt * rng.sample::<f64, _>(StandardNormal)),
            )
        })
        .collect())
}

/// Streaming Euler engine for the target. Strategies consume the increments
/// one step at a time so long unit-scale runs never materialize full target
/// arrays unless asked to.
pub(crate) struct TargetStream {
    model: TargetModel,
    rng: ChaCha8Rng,
    factor: f64,
    chol_cache: Option<DMatrix<f64>>,
    drift_buf: DVector<f64>,
    noise_buf: DVector<f64>,
    pub(crate) last_diffusion: DMatrix<f64>,
}

impl TargetStream {
    pub fn new(model: &TargetModel, seed: u64) -> Result<Self> {
        model.validate()?;
        let d = model.dim;
        let mut last_diffusion = DMatrix::zeros(d, d);
        let chol_cache = if model.is_time_invariant() {
            let a = model.diffusion.eval(0.0, 0.0);
            last_diffusion = a.clone();
            Some(cholesky_or_zero(&a)?)
        } else {
            None
        };
        Ok(TargetStream {
            factor: model.factor.as_ref().map_or(0.0, |f| f.init),
            model: model.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            chol_cache,
            drift_buf: DVector::zeros(d),
            noise_buf: DVector::zeros(d),
            last_diffusion,
        })
    }

    /// Advances one step of size `dt` from time `t`; writes `ΔX°` into `out`.
    pub fn step(&mut self, t: f64, dt: f64, out: &mut DVector<f64>) -> Result<()> {
        let sqrt_dt = dt.sqrt();
        // the factor draws first so coefficient evaluation stays predictable
        if let Some(f) = &self.model.factor {
            let z: f64 = self.rng.sample(StandardNormal);
            self.factor += f.rate * (f.mean - self.factor) * dt + f.vol * sqrt_dt * z;
        }
        self.model
            .drift
            .eval_into(t, self.factor, &mut self.drift_buf);
        for z in self.noise_buf.iter_mut() {
            *z = sqrt_dt * self.rng.sample::<f64, _>(StandardNormal);
        }
        out.copy_from(&self.drift_buf);
        *out *= dt;
        match &self.chol_cache {
            Some(c) => out.gemv(1.0, c, &self.noise_buf, 1.0),
            None => {
                let a = self.model.diffusion.eval(t, self.factor);
                let l = cholesky_or_zero(&a)?;
                self.last_diffusion = a;
                out.gemv(1.0, &l, &self.noise_buf, 1.0);
            }
        }
        Ok(())
    }
}

/// Lower-triangular factor `L` with `LLᵀ = a`. A singular but positive
/// semidefinite `a` (e.g. a ≡ 0 test scenarios) falls back to the symmetric
/// square root; a genuinely indefinite `a` is an error.
fn cholesky_or_zero(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.amax() == 0.0 {
        return Ok(DMatrix::zeros(a.nrows(), a.ncols()));
    }
    match a.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => {
            // semidefinite fallback
            crate::linalg::sym_sqrt(a).map_err(|_| {
                Error::NotPositiveDefinite("diffusion Cholesky factorization failed".into())
            })
        }
    }
}

/// Euler scheme for the target on the given grid:
/// `X°_{i+1} = X°_i + b_{t_i} dt + L_{t_i} ΔW_i`, `X°_0 = 0`.
pub fn simulate_target(model: &TargetModel, grid: &TimeGrid, seed: u64) -> Result<TargetPath> {
    let d = model.dim;
    let mut stream = TargetStream::new(model, seed)?;
    let mut values = vec![0.0; (grid.n_steps + 1) * d];
    let mut brownian = Vec::with_capacity(grid.n_steps * d);
    let mut diffusion_values = Vec::with_capacity(grid.n_steps);
    let mut x = DVector::<f64>::zeros(d);
    let mut dx = DVector::<f64>::zeros(d);
    for i in 0..grid.n_steps {
        stream.step(grid.t(i), grid.dt, &mut dx)?;
        brownian.extend(stream.noise_buf.iter().copied());
        diffusion_values.push(stream.last_diffusion.clone());
        x += &dx;
        values[(i + 1) * d..(i + 2) * d].copy_from_slice(x.as_slice());
    }
    Ok(TargetPath {
        grid: grid.clone(),
        dim: d,
        values,
        brownian,
        diffusion_values,
    })
}
