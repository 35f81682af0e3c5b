//! Feedback strategies for the tracking problem and their controlled paths.
//!
//! Three families, all Markovian in `(t, state)`:
//!
//! - impulse: triplet `(U, G, ξ)` — drift at speed `U` inside the moving
//!   domain `G_t`, jump `ξ_t(x)` back inside when the boundary is hit;
//! - singular: triplet `(U, G, Γ)` — same interior behaviour, local-time
//!   reflection along the cone direction `γ ∈ Γ_t(x) ∩ Δ` at the boundary;
//! - regular: a plain feedback speed policy `U` on all of `ℝ^d`.
//!
//! Under the ε-scaling the strategy acts through
//! `U^ε(x) = ε^{-β} U_t(ε^{-β}x)`, `ξ^ε(x) = ε^β ξ_t(ε^{-β}x)`,
//! `G^ε_t = ε^β G_t`, so the rescaled deviation `ε^{-β} X^ε` lives on the
//! unit-scale geometry and its clock runs at `ε^{-2β}`.

mod checks;
mod simulate;

pub use checks::{
    check_admissibility_impulse, check_admissibility_singular, check_lyapunov_regular,
    jump_count_diagnostic, AdmissibilityReport,
};
pub use simulate::{run_impulse, run_regular, run_singular, SimOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::check_spd;
use crate::sde::{MatrixFn, ScalarFn, TimeGrid};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Moving domain `G_t` at unit scale. Supported shapes: a symmetric interval
/// in d=1 and an ellipsoid `{x : xᵀ A_t x < 1}` in any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    Interval { half_width: ScalarFn },
    Ellipsoid { matrix: MatrixFn },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Ellipsoid { matrix } => matrix.dim(),
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        for i in 0..=8 {
            let t = horizon * i as f64 / 8.0;
            match self {
                Domain::Interval { half_width } => {
                    if !(half_width.eval(t) > 0.0) {
                        return Err(Error::InvalidSpec(format!(
                            "interval half-width must stay positive (t={t})"
                        )));
                    }
                }
                Domain::Ellipsoid { matrix } => check_spd(&matrix.eval(t), "domain matrix")?,
            }
        }
        Ok(())
    }

    /// Shape function `s` with `G_t = {s < 1}` and `∂G_t = {s = 1}`.
    /// Interval: `|x| / L_t`; ellipsoid: `xᵀ A_t x`.
    pub fn shape_value(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { half_width } => x[0].abs() / half_width.eval(t),
            Domain::Ellipsoid { matrix } => {
                let a = matrix.eval(t);
                let mut s = 0.0;
                for i in 0..a.nrows() {
                    for j in 0..a.ncols() {
                        s += x[i] * a[(i, j)] * x[j];
                    }
                }
                s
            }
        }
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        self.shape_value(t, x) < 1.0
    }

    pub fn contains_closure(&self, t: f64, x: &[f64]) -> bool {
        self.shape_value(t, x) <= 1.0 + 1e-12
    }

    /// First crossing of the open segment `from → to` with `∂G_t`, assuming
    /// `from` is inside (or on) the boundary and `to` is outside. Returns
    /// `(θ, boundary point)` with `θ ∈ [0, 1]`.
    pub fn segment_crossing(
        &self,
        t: f64,
        from: &DVector<f64>,
        to: &DVector<f64>,
    ) -> (f64, DVector<f64>) {
        match self {
            Domain::Interval { half_width } => {
                let l = half_width.eval(t);
                let (x0, x1) = (from[0], to[0]);
                let target = if x1 >= l { l } else { -l };
                let theta = if (x1 - x0).abs() < f64::EPSILON {
                    1.0
                } else {
                    ((target - x0) / (x1 - x0)).clamp(0.0, 1.0)
                };
                (theta, DVector::from_vec(vec![target]))
            }
            Domain::Ellipsoid { matrix } => {
                let a = matrix.eval(t);
                let delta = to - from;
                let qa = (&a * &delta).dot(&delta);
                let qb = 2.0 * (&a * from).dot(&delta);
                let qc = (&a * from).dot(from) - 1.0;
                let theta = if qa.abs() < 1e-300 {
                    1.0
                } else {
                    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                    ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0)
                };
                let point = from + delta * theta;
                (theta, point)
            }
        }
    }

    /// Radial projection onto the boundary (exact for the supported shapes:
    /// rescaling toward the origin).
    pub fn project_radial(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let s = self.shape_value(t, x.as_slice());
        match self {
            Domain::Interval { .. } => x / s,
            Domain::Ellipsoid { .. } => x / s.sqrt(),
        }
    }

    /// Deterministic boundary sample (d=1: the two endpoints; d=2: equally
    /// spaced angles; d>2: a seeded sphere sample), mapped onto `∂G_t`.
    pub fn boundary_points(&self, t: f64, n: usize) -> Vec<DVector<f64>> {
        match self {
            Domain::Interval { half_width } => {
                let l = half_width.eval(t);
                vec![DVector::from_vec(vec![-l]), DVector::from_vec(vec![l])]
            }
            Domain::Ellipsoid { matrix } => {
                let a = matrix.eval(t);
                let d = a.nrows();
                let dirs: Vec<DVector<f64>> = if d == 2 {
                    (0..n.max(4))
                        .map(|k| {
                            let th = 2.0 * std::f64::consts::PI * k as f64 / n.max(4) as f64;
                            DVector::from_vec(vec![th.cos(), th.sin()])
                        })
                        .collect()
                } else {
                    use rand::{Rng, SeedableRng};
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0b0d7);
                    (0..n.max(4))
                        .map(|_| {
                            let v = DVector::from_fn(d, |_, _| {
                                rng.sample::<f64, _>(rand_distr::StandardNormal)
                            });
                            let nrm = v.norm();
                            v / nrm
                        })
                        .collect()
                };
                dirs.into_iter()
                    .map(|v| {
                        let q = (&a * &v).dot(&v);
                        v / q.sqrt()
                    })
                    .collect()
            }
        }
    }

    /// Half-widths of the axis-aligned bounding box of `Ḡ_t`.
    pub fn bounding_half_widths(&self, t: f64) -> Vec<f64> {
        match self {
            Domain::Interval { half_width } => vec![half_width.eval(t)],
            Domain::Ellipsoid { matrix } => {
                // max x_i over {x'Ax <= 1} is sqrt((A^{-1})_{ii})
                let a = matrix.eval(t);
                let inv = a
                    .clone()
                    .try_inverse()
                    .expect("domain matrix validated as SPD");
                (0..a.nrows()).map(|i| inv[(i, i)].sqrt()).collect()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Domain::Interval { half_width } => half_width.is_constant(),
            Domain::Ellipsoid { matrix } => matrix.is_constant(),
        }
    }
}

// ---------------------------------------------------------------------------
// Strategy building blocks
// ---------------------------------------------------------------------------

/// Jump rule on `∂G_t`. `ξ_t(x) = -α_t x` with `α_t ∈ (0, 1]`; `α = 1` jumps
/// to the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum JumpRule {
    Proportional { alpha: ScalarFn },
}

impl JumpRule {
    pub fn xi(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            JumpRule::Proportional { alpha } => x * (-alpha.eval(t)),
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            JumpRule::Proportional { alpha } => {
                for i in 0..=8 {
                    let a = alpha.eval(horizon * i as f64 / 8.0);
                    if !(a > 0.0 && a <= 1.0) {
                        return Err(Error::InvalidSpec(format!(
                            "proportional jump needs alpha in (0,1], got {a}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            JumpRule::Proportional { alpha } => alpha.is_constant(),
        }
    }
}

/// Reflection direction field on `∂G_t`, ℓ¹-normalized so `γ ∈ Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum DirectionField {
    /// `γ(x) = -x / ‖x‖₁`
    RadialInward,
    /// Inward normal `-A_t x`, ℓ¹-normalized (coincides with radial for
    /// intervals and circles).
    InwardNormal,
}

impl DirectionField {
    pub fn gamma(&self, domain: &Domain, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let raw = match self {
            DirectionField::RadialInward => -x,
            DirectionField::InwardNormal => match domain {
                Domain::Interval { .. } => -x,
                Domain::Ellipsoid { matrix } => -(matrix.eval(t) * x),
            },
        };
        let l1: f64 = raw.iter().map(|v| v.abs()).sum();
        raw / l1
    }
}

/// Feedback speed field `U_t` at unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum FeedbackField {
    Zero,
    /// `U_t(x) = -Σ_t x`
    Linear {
        matrix: MatrixFn,
    },
}

impl FeedbackField {
    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeedbackField::Zero => DVector::zeros(x.len()),
            FeedbackField::Linear { matrix } => -(matrix.eval(t) * x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FeedbackField::Zero)
    }

    pub fn is_constant(&self) -> bool {
        match self {
            FeedbackField::Zero => true,
            FeedbackField::Linear { matrix } => matrix.is_constant(),
        }
    }

    /// Gain matrix at fixed time (`Σ_t` for linear fields, 0 for zero).
    pub fn gain(&self, t: f64, dim: usize) -> DMatrix<f64> {
        match self {
            FeedbackField::Zero => DMatrix::zeros(dim, dim),
            FeedbackField::Linear { matrix } => matrix.eval(t),
        }
    }
}

/// Potential / Lyapunov function `V ∈ C²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `V(x) = ‖x‖²`
    NormSquared,
    /// `V(x) = xᵀ M x`
    Quadratic { matrix: crate::linalg::SymMat },
}

impl Potential {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Potential::NormSquared => x.dot(x),
            Potential::Quadratic { matrix } => (&matrix.0 * x).dot(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Potential::NormSquared => x * 2.0,
            Potential::Quadratic { matrix } => (&matrix.0 * x) * 2.0,
        }
    }

    pub fn hessian(&self, dim: usize) -> DMatrix<f64> {
        match self {
            Potential::NormSquared => DMatrix::identity(dim, dim) * 2.0,
            Potential::Quadratic { matrix } => matrix.0.clone() * 2.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Strategy triplets
// ---------------------------------------------------------------------------

/// Impulse triplet `(U, G, ξ)` with its potential certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseTriplet {
    pub speed: FeedbackField,
    pub domain: Domain,
    pub jump: JumpRule,
    pub potential: Potential,
}

/// Singular triplet `(U, G, Γ)` with its potential certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularTriplet {
    pub speed: FeedbackField,
    pub domain: Domain,
    pub direction: DirectionField,
    pub potential: Potential,
}

/// Regular feedback policy with its Lyapunov certificate
/// `A^a_U V ≤ θ - 2Θ V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularPolicy {
    pub speed: FeedbackField,
    pub lyapunov: Potential,
    pub theta: f64,
    pub big_theta: f64,
}

/// Any of the three strategy families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StrategySpec {
    Impulse(ImpulseTriplet),
    Singular(SingularTriplet),
    Regular(RegularPolicy),
}

impl StrategySpec {
    pub fn speed(&self) -> &FeedbackField {
        match self {
            StrategySpec::Impulse(t) => &t.speed,
            StrategySpec::Singular(t) => &t.speed,
            StrategySpec::Regular(p) => &p.speed,
        }
    }

    pub fn domain(&self) -> Option<&Domain> {
        match self {
            StrategySpec::Impulse(t) => Some(&t.domain),
            StrategySpec::Singular(t) => Some(&t.domain),
            StrategySpec::Regular(_) => None,
        }
    }

    pub fn is_time_invariant(&self) -> bool {
        match self {
            StrategySpec::Impulse(t) => {
                t.speed.is_constant() && t.domain.is_constant() && t.jump.is_constant()
            }
            StrategySpec::Singular(t) => t.speed.is_constant() && t.domain.is_constant(),
            StrategySpec::Regular(p) => p.speed.is_constant(),
        }
    }
}

// ---------------------------------------------------------------------------
// Controlled path
// ---------------------------------------------------------------------------

/// A recorded jump `ξ_j` at `τ_j`, applied from the boundary point
/// `pre_jump` (stored at physical ε-scale).
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub step: usize,
    pub pre_jump: DVector<f64>,
    pub jump: DVector<f64>,
}

/// A recorded reflection increment `γ dφ` at a boundary contact.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionEvent {
    pub time: f64,
    pub step: usize,
    /// Boundary contact point (physical scale).
    pub point: DVector<f64>,
    /// Direction in the ℓ¹ simplex `Δ`.
    pub gamma: DVector<f64>,
    /// ℓ¹ magnitude of the applied displacement, so displacement = γ·dφ.
    pub dphi: f64,
}

/// Deviation trajectory of a controlled run plus every intervention record
/// needed to reconstruct it:
/// `X^ε_t = -X°_t + ∫ u^ε ds + Σ ξ_j (+ ∫ γ dφ)`.
#[derive(Debug, Clone)]
pub struct ControlledPath {
    pub grid: TimeGrid,
    pub dim: usize,
    pub eps: f64,
    /// Spatial scale `ε^β` the run was generated at (1 for unit-scale runs).
    pub scale: f64,
    /// Flat row-major deviation states, `n_steps + 1` rows.
    states: Vec<f64>,
    /// Flat row-major target states `X°`, `n_steps + 1` rows.
    target: Vec<f64>,
    /// Flat row-major controls `u^ε`, `n_steps` rows (left endpoints).
    controls: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub reflections: Vec<ReflectionEvent>,
}

impl ControlledPath {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: TimeGrid,
        dim: usize,
        eps: f64,
        scale: f64,
        states: Vec<f64>,
        controls: Vec<f64>,
        jumps: Vec<JumpEvent>,
        reflections: Vec<ReflectionEvent>,
    ) -> ControlledPath {
        let target = vec![0.0; states.len()];
        ControlledPath {
            grid,
            dim,
            eps,
            scale,
            states,
            target,
            controls,
            jumps,
            reflections,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_run(
        grid: TimeGrid,
        dim: usize,
        eps: f64,
        scale: f64,
        states: Vec<f64>,
        target: Vec<f64>,
        controls: Vec<f64>,
        jumps: Vec<JumpEvent>,
        reflections: Vec<ReflectionEvent>,
    ) -> ControlledPath {
        ControlledPath {
            grid,
            dim,
            eps,
            scale,
            states,
            target,
            controls,
            jumps,
            reflections,
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn controls_len(&self) -> usize {
        self.controls.len() / self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target_state(&self, i: usize) -> &[f64] {
        &self.target[i * self.dim..(i + 1) * self.dim]
    }

    pub fn control(&self, i: usize) -> &[f64] {
        &self.controls[i * self.dim..(i + 1) * self.dim]
    }

    pub fn phi_total(&self) -> f64 {
        self.reflections.iter().map(|r| r.dphi).sum()
    }

    /// Max deviation over grid points between the stored state and the
    /// reconstruction `-X° + ∫u ds + Σξ + ∫γdφ` accumulated in simulation
    /// order. Should be at rounding level for a valid run.
    pub fn path_identity_error(&self) -> f64 {
        let d = self.dim;
        let n = self.n_states() - 1;
        let mut rec = vec![0.0; d];
        let mut worst: f64 = 0.0;
        let mut jump_idx = 0;
        let mut refl_idx = 0;
        for i in 0..=n {
            if i > 0 {
                let step = i - 1;
                for c in 0..d {
                    rec[c] += -(self.target[i * d + c] - self.target[(i - 1) * d + c])
                        + self.controls[step * d + c] * self.grid.dt;
                }
                while jump_idx < self.jumps.len() && self.jumps[jump_idx].step == step {
                    for c in 0..d {
                        rec[c] += self.jumps[jump_idx].jump[c];
                    }
                    jump_idx += 1;
                }
                while refl_idx < self.reflections.len() && self.reflections[refl_idx].step == step {
                    let r = &self.reflections[refl_idx];
                    for c in 0..d {
                        rec[c] += r.gamma[c] * r.dphi;
                    }
                    refl_idx += 1;
                }
            }
            for c in 0..d {
                worst = worst.max((rec[c] - self.states[i * d + c]).abs());
            }
        }
        worst
    }

    /// CSV dump: time, deviation coordinates, control, cumulative φ, jump
    /// marker.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let d = self.dim;
        let mut header = vec!["time".to_string()];
        for c in 0..d {
            header.push(format!("x{}", c + 1));
        }
        for c in 0..d {
            header.push(format!("u{}", c + 1));
        }
        header.push("phi".into());
        header.push("jump".into());
        wtr.write_record(&header)?;
        let mut phi = 0.0;
        let mut jump_idx = 0;
        let mut refl_idx = 0;
        for i in 0..self.n_states() {
            let mut row = vec![format!("{}", self.grid.t(i))];
            for c in 0..d {
                row.push(format!("{}", self.state(i)[c]));
            }
            for c in 0..d {
                let u = if i < self.controls_len() {
                    self.control(i)[c]
                } else {
                    0.0
                };
                row.push(format!("{u}"));
            }
            let mut jumped = 0;
            if i > 0 {
                let step = i - 1;
                while refl_idx < self.reflections.len() && self.reflections[refl_idx].step == step {
                    phi += self.reflections[refl_idx].dphi;
                    refl_idx += 1;
                }
                while jump_idx < self.jumps.len() && self.jumps[jump_idx].step == step {
                    jumped = 1;
                    jump_idx += 1;
                }
            }
            row.push(format!("{phi}"));
            row.push(format!("{jumped}"));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
