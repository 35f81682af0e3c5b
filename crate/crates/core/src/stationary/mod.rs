//! Stationary occupation pairs `(π, ν)` / `(π, ρ)` and the limit costs of
//! the convergence theorems.
//!
//! A strategy at unit scale settles into a stationary regime characterized
//! by the adjoint constraint
//!
//! ```text
//! ∫ A^a_U f dπ + ∫ B f dν = 0     for all f ∈ C²₀,
//! ```
//!
//! with `A^a_U f = ½ Σ a_ij ∂²_ij f + U·∇f` and `B_ξ f(x) = f(x+ξ(x)) - f(x)`
//! (jumps) or `Bf(x,γ) = γ·∇f(x)` (reflection). This module estimates the
//! pair two independent ways — empirically from long unit-scale runs, and
//! from a finite-difference Markov-chain discretization solved by power
//! iteration — measures the constraint residual against a polynomial test
//! set, and integrates the cost densities to produce the limit values
//! `c(a, U, G, ξ; r, l, k, h)`.

mod oracle;

pub use oracle::{markov_chain_oracle, BoundaryRule, OracleOptions, OracleSolution};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form;
use crate::cost::{CostFn, CostSpec};
use crate::strategies::{
    run_impulse, run_regular, run_singular, ControlledPath, DirectionField, Domain, FeedbackField,
    JumpRule, SimOptions, StrategySpec,
};
use crate::{mix_seed, Error, Result, TargetModel};

// ---------------------------------------------------------------------------
// Grids and histograms
// ---------------------------------------------------------------------------

/// Rectangular histogram grid (d ≤ 2 in practice) plus the number of angular
/// boundary bins used for the boundary measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
    pub boundary_bins: usize,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (self.hi[i] - self.lo[i]) / self.bins[i] as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Covering grid for the closure of a domain at time `t`.
    pub fn for_domain(
        domain: &Domain,
        t: f64,
        bins_per_axis: usize,
        boundary_bins: usize,
    ) -> GridSpec {
        let half = domain.bounding_half_widths(t);
        GridSpec {
            lo: half.iter().map(|h| -h).collect(),
            hi: half.clone(),
            bins: vec![bins_per_axis; half.len()],
            boundary_bins,
        }
    }

    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for i in 0..self.dim() {
            let w = (self.hi[i] - self.lo[i]) / self.bins[i] as f64;
            let r = (x[i] - self.lo[i]) / w;
            if r < 0.0 || r >= self.bins[i] as f64 {
                // points exactly on the top face belong to the last cell
                if (x[i] - self.hi[i]).abs() < 1e-12 * (1.0 + self.hi[i].abs()) {
                    flat = flat * self.bins[i] + (self.bins[i] - 1);
                    continue;
                }
                return None;
            }
            flat = flat * self.bins[i] + r as usize;
        }
        Some(flat)
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut idx = flat;
        let d = self.dim();
        let mut out = vec![0.0; d];
        for i in (0..d).rev() {
            let b = self.bins[i];
            let w = (self.hi[i] - self.lo[i]) / b as f64;
            out[i] = self.lo[i] + (idx % b) as f64 * w + 0.5 * w;
            idx /= b;
        }
        out
    }
}

/// Probability histogram over a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct Histogram {
    pub grid: GridSpec,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            for m in &mut self.mass {
                *m /= t;
            }
        }
    }

    /// `∫ f dπ` by midpoint quadrature over occupied cells.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m != 0.0 {
                acc += m * f(&self.grid.center(i));
            }
        }
        acc
    }

    pub fn mean_of(&self, f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.integrate(f)
    }
}

/// One boundary bin: a representative boundary point and its per-unit-time
/// intensity (jump rate for ν, local-time rate for ρ).
#[derive(Debug, Clone)]
pub struct BoundaryBin {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// Interior measure π (probability) plus the boundary measure (ν or ρ)
/// normalized per unit of intrinsic time.
#[derive(Debug, Clone)]
pub struct OccupationPair {
    pub interior: Histogram,
    pub boundary: Vec<BoundaryBin>,
    pub total_boundary_mass: f64,
}

impl OccupationPair {
    /// `∫ f dν` (or dρ) over boundary bins.
    pub fn integrate_boundary(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.boundary.iter().map(|b| b.mass * f(&b.point)).sum()
    }

    /// CSV dump: kind, coordinates, mass.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let d = self.interior.grid.dim();
        let mut header = vec!["kind".to_string()];
        for c in 0..d {
            header.push(format!("x{}", c + 1));
        }
        header.push("mass".into());
        wtr.write_record(&header)?;
        for (i, &m) in self.interior.mass.iter().enumerate() {
            if m != 0.0 {
                let mut row = vec!["interior".to_string()];
                for v in self.interior.grid.center(i) {
                    row.push(format!("{v}"));
                }
                row.push(format!("{m}"));
                wtr.write_record(&row)?;
            }
        }
        for b in &self.boundary {
            let mut row = vec!["boundary".to_string()];
            for v in &b.point {
                row.push(format!("{v}"));
            }
            row.push(format!("{}", b.mass));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn boundary_bin_index(domain: &Domain, t: f64, point: &[f64], n_bins: usize) -> usize {
    match domain {
        Domain::Interval { .. } => {
            if point[0] >= 0.0 {
                1
            } else {
                0
            }
        }
        Domain::Ellipsoid { .. } => {
            let _ = t;
            let angle = point[1].atan2(point[0]);
            let tau = 2.0 * std::f64::consts::PI;
            let frac = (angle.rem_euclid(tau)) / tau;
            ((frac * n_bins as f64) as usize).min(n_bins - 1)
        }
    }
}

fn boundary_bin_points(domain: &Domain, t: f64, n_bins: usize) -> Vec<Vec<f64>> {
    match domain {
        Domain::Interval { half_width } => {
            let l = half_width.eval(t);
            vec![vec![-l], vec![l]]
        }
        Domain::Ellipsoid { matrix } => {
            let a = matrix.eval(t);
            (0..n_bins)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_bins as f64;
                    let v = DVector::from_vec(vec![th.cos(), th.sin()]);
                    let q = (&a * &v).dot(&v);
                    let p = &v / q.sqrt();
                    p.iter().copied().collect()
                })
                .collect()
        }
    }
}

// ---------------------------------------------------------------------------
// Empirical occupation
// ---------------------------------------------------------------------------

/// Time-average histogram of the rescaled state `ε^{-β} X^ε` plus the
/// per-unit-intrinsic-time boundary intensities (jump counts for impulse,
/// φ-increments for reflection), with the leading `burn_in` fraction of the
/// horizon discarded.
pub fn empirical_occupation(
    path: &ControlledPath,
    burn_in: f64,
    grid: &GridSpec,
    domain: Option<&Domain>,
) -> Result<OccupationPair> {
    let n = path.n_states();
    let start = ((n as f64) * burn_in.clamp(0.0, 0.95)) as usize;
    if n - start < 2 {
        return Err(Error::EmptyPath);
    }
    let scale = path.scale;
    let t_burn = path.grid.t(start);
    let intrinsic_duration = (path.grid.t_end - t_burn) / (scale * scale);

    let mut hist = Histogram {
        grid: grid.clone(),
        mass: vec![0.0; grid.n_cells()],
    };
    let mut kept = 0usize;
    for i in start..n {
        let y: Vec<f64> = path.state(i).iter().map(|v| v / scale).collect();
        if let Some(c) = grid.locate(&y) {
            hist.mass[c] += 1.0;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::EmptyPath);
    }
    hist.normalize();

    let n_bins = grid.boundary_bins.max(2);
    let mut boundary: Vec<BoundaryBin> = match domain {
        Some(dom) => boundary_bin_points(dom, path.grid.t_end, n_bins)
            .into_iter()
            .map(|point| BoundaryBin { point, mass: 0.0 })
            .collect(),
        None => Vec::new(),
    };
    if let Some(dom) = domain {
        for j in &path.jumps {
            if j.time < t_burn {
                continue;
            }
            let y: Vec<f64> = j.pre_jump.iter().map(|v| v / scale).collect();
            let b = boundary_bin_index(dom, j.time, &y, boundary.len());
            boundary[b].mass += 1.0 / intrinsic_duration;
        }
        for r in &path.reflections {
            if r.time < t_burn {
                continue;
            }
            let y: Vec<f64> = r.point.iter().map(|v| v / scale).collect();
            let b = boundary_bin_index(dom, r.time, &y, boundary.len());
            // intrinsic local time: dφ at physical scale is ε^β per unit
            boundary[b].mass += (r.dphi / scale) / intrinsic_duration;
        }
    }
    let total_boundary_mass = boundary.iter().map(|b| b.mass).sum();
    Ok(OccupationPair {
        interior: hist,
        boundary,
        total_boundary_mass,
    })
}

// ---------------------------------------------------------------------------
// Test functions and the separability residual
// ---------------------------------------------------------------------------

/// A monomial times a C² radial cutoff (≡ 1 on `r ≤ inner`, ≡ 0 on
/// `r ≥ outer`), giving a compactly supported C² test function.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub exps: Vec<u32>,
    pub inner: f64,
    pub outer: f64,
}

impl TestFunction {
    fn mono(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.exps)
            .map(|(v, &e)| v.powi(e as i32))
            .product()
    }

    fn mono_grad(&self, x: &[f64], i: usize) -> f64 {
        let e = self.exps[i];
        if e == 0 {
            return 0.0;
        }
        let mut p = e as f64 * x[i].powi(e as i32 - 1);
        for (j, (v, &ej)) in x.iter().zip(&self.exps).enumerate() {
            if j != i {
                p *= v.powi(ej as i32);
            }
        }
        p
    }

    fn mono_hess(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let mut exps = self.exps.clone();
        let mut coef = 1.0;
        for k in [i, j] {
            if exps[k] == 0 {
                return 0.0;
            }
            coef *= exps[k] as f64;
            exps[k] -= 1;
        }
        coef * x
            .iter()
            .zip(&exps)
            .map(|(v, &e)| v.powi(e as i32))
            .product::<f64>()
    }

    fn cutoff(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.inner {
            (1.0, 0.0, 0.0)
        } else if r >= self.outer {
            (0.0, 0.0, 0.0)
        } else {
            let w = self.outer - self.inner;
            let u = (r - self.inner) / w;
            let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
            let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u);
            let dds = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
            (1.0 - s, -ds / w, -dds / (w * w))
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (chi, _, _) = self.cutoff(r);
        self.mono(x) * chi
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (chi, dchi, _) = self.cutoff(r);
        let m = self.mono(x);
        (0..x.len())
            .map(|i| {
                let dr = if r > 0.0 { x[i] / r } else { 0.0 };
                self.mono_grad(x, i) * chi + m * dchi * dr
            })
            .collect()
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (chi, dchi, ddchi) = self.cutoff(r);
        let m = self.mono(x);
        DMatrix::from_fn(d, d, |i, j| {
            let mut h = self.mono_hess(x, i, j) * chi;
            if dchi != 0.0 || ddchi != 0.0 {
                let (ri, rj) = (x[i] / r, x[j] / r);
                h += self.mono_grad(x, i) * dchi * rj + self.mono_grad(x, j) * dchi * ri;
                let hr = if i == j {
                    (1.0 - ri * ri) / r
                } else {
                    -ri * rj / r
                };
                h += m * (ddchi * ri * rj + dchi * hr);
            }
            h
        })
    }
}

/// All monomials of total degree 1..=max_degree with the same cutoff radii.
pub fn polynomial_test_set(
    dim: usize,
    max_degree: u32,
    inner: f64,
    outer: f64,
) -> Vec<TestFunction> {
    fn rec(dim: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(dim, left - e, cur, out);
            cur.pop();
        }
    }
    let mut exps = Vec::new();
    rec(dim, max_degree, &mut Vec::new(), &mut exps);
    exps.into_iter()
        .filter(|e| e.iter().sum::<u32>() > 0)
        .map(|exps| TestFunction { exps, inner, outer })
        .collect()
}

/// Boundary operator entering the stationarity constraint.
pub enum BoundaryOp<'a> {
    /// `B_ξ f(x) = f(x + ξ(x)) - f(x)`
    Jump { rule: &'a JumpRule },
    /// `B f(x) = γ(x)·∇f(x)`
    Reflect {
        field: DirectionField,
        domain: &'a Domain,
    },
    /// No boundary measure (regular policies).
    None,
}

/// Max over the test set of
/// `|∫ A^a_U f dπ + ∫ B f d(ν or ρ)|` by quadrature over the pair's bins.
pub fn separability_residual(
    pair: &OccupationPair,
    a: &DMatrix<f64>,
    speed: &FeedbackField,
    t: f64,
    boundary: &BoundaryOp,
    tests: &[TestFunction],
) -> f64 {
    let mut worst: f64 = 0.0;
    for f in tests {
        let mut acc = pair.interior.integrate(|x| {
            let h = f.hessian(x);
            let mut gen = 0.5 * (a * &h).trace();
            let xv = DVector::from_column_slice(x);
            let u = speed.eval(t, &xv);
            let g = f.gradient(x);
            for i in 0..x.len() {
                gen += u[i] * g[i];
            }
            gen
        });
        match boundary {
            BoundaryOp::Jump { rule } => {
                acc += pair.integrate_boundary(|x| {
                    let xv = DVector::from_column_slice(x);
                    let jumped = &xv + rule.xi(t, &xv);
                    f.value(jumped.as_slice()) - f.value(x)
                });
            }
            BoundaryOp::Reflect { field, domain } => {
                acc += pair.integrate_boundary(|x| {
                    let xv = DVector::from_column_slice(x);
                    let gamma = field.gamma(domain, t, &xv);
                    let g = f.gradient(x);
                    (0..x.len()).map(|i| gamma[i] * g[i]).sum()
                });
            }
            BoundaryOp::None => {}
        }
        worst = worst.max(acc.abs());
    }
    worst
}

/// Convenience: a test set sized to a pair's grid (cutoff safely outside the
/// sampled region so the functions are exactly polynomial on it).
pub fn default_test_set(pair: &OccupationPair) -> Vec<TestFunction> {
    let g = &pair.interior.grid;
    let radius =
        g.lo.iter()
            .chain(g.hi.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            * (g.dim() as f64).sqrt();
    polynomial_test_set(g.dim(), 4, radius * 1.5 + 1.0, radius * 2.0 + 2.0)
}

// ---------------------------------------------------------------------------
// Limit costs
// ---------------------------------------------------------------------------

/// Monte Carlo settings for the simulation estimator of the limit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimLimitOptions {
    pub reps: usize,
    pub horizon: f64,
    pub n_sub: usize,
    pub burn_in: f64,
    pub base_seed: u64,
    pub bins: usize,
    pub boundary_bins: usize,
}

impl Default for SimLimitOptions {
    fn default() -> Self {
        SimLimitOptions {
            reps: 8,
            horizon: 1e4,
            n_sub: 100,
            burn_in: 0.1,
            base_seed: 0x5eed,
            bins: 200,
            boundary_bins: 16,
        }
    }
}

/// How to estimate the stationary pair behind a limit cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitEstimator {
    Oracle {
        bins: usize,
    },
    Simulation(SimLimitOptions),
    ClosedForm,
    /// Oracle value cross-checked against the simulation estimator; raises
    /// an estimator-consistency alarm when they disagree beyond
    /// `3·(simulation SE + grid-refinement bias estimate)`.
    Cross {
        bins: usize,
        sim: SimLimitOptions,
    },
}

/// A limit cost `c` with its per-term decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCostEstimate {
    pub total: f64,
    pub deviation_term: f64,
    pub regular_term: f64,
    pub fixed_term: f64,
    pub proportional_term: f64,
    pub std_error: Option<f64>,
}

impl LimitCostEstimate {
    fn zero() -> Self {
        LimitCostEstimate {
            total: 0.0,
            deviation_term: 0.0,
            regular_term: 0.0,
            fixed_term: 0.0,
            proportional_term: 0.0,
            std_error: None,
        }
    }
}

/// Integrates the cost densities of the theorem against an occupation pair:
/// `c = ∫ (rD + lQ∘U) dπ + ∫ (kF(ξ) + hP(ξ)) dν` or `+ ∫ hP(γ) dρ`.
pub fn integrate_pair_cost(
    pair: &OccupationPair,
    strategy: &StrategySpec,
    cost: &CostSpec,
    t: f64,
) -> LimitCostEstimate {
    let (r, l, k, h) = (
        cost.r.eval(t),
        cost.l.eval(t),
        cost.k.eval(t),
        cost.h.eval(t),
    );
    let speed = strategy.speed();
    let deviation_term = r * pair.interior.integrate(|x| cost.deviation.eval(x));
    let regular_term = l * pair.interior.integrate(|x| {
        let xv = DVector::from_column_slice(x);
        cost.regular.eval(speed.eval(t, &xv).as_slice())
    });
    let (mut fixed_term, mut proportional_term) = (0.0, 0.0);
    match strategy {
        StrategySpec::Impulse(tr) => {
            fixed_term = k * pair.integrate_boundary(|x| {
                let xv = DVector::from_column_slice(x);
                cost.fixed.eval(tr.jump.xi(t, &xv).as_slice())
            });
            proportional_term = h * pair.integrate_boundary(|x| {
                let xv = DVector::from_column_slice(x);
                cost.proportional.eval(tr.jump.xi(t, &xv).as_slice())
            });
        }
        StrategySpec::Singular(tr) => {
            proportional_term = h * pair.integrate_boundary(|x| {
                let xv = DVector::from_column_slice(x);
                cost.proportional
                    .eval(tr.direction.gamma(&tr.domain, t, &xv).as_slice())
            });
        }
        StrategySpec::Regular(_) => {}
    }
    LimitCostEstimate {
        total: deviation_term + regular_term + fixed_term + proportional_term,
        deviation_term,
        regular_term,
        fixed_term,
        proportional_term,
        std_error: None,
    }
}

/// Oracle occupation pair for a strategy at frozen time `t`; regular
/// policies are truncated to a reflecting ellipsoid at six stationary
/// standard deviations.
pub fn oracle_pair_for(
    a: &DMatrix<f64>,
    strategy: &StrategySpec,
    t: f64,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    match strategy {
        StrategySpec::Impulse(tr) => markov_chain_oracle(
            a,
            &tr.speed,
            &tr.domain,
            &BoundaryRule::Jump(tr.jump.clone()),
            t,
            opts,
        ),
        StrategySpec::Singular(tr) => markov_chain_oracle(
            a,
            &tr.speed,
            &tr.domain,
            &BoundaryRule::Reflect(tr.direction),
            t,
            opts,
        ),
        StrategySpec::Regular(p) => {
            let domain = regular_truncation_domain(a, p, t)?;
            markov_chain_oracle(
                a,
                &p.speed,
                &domain,
                &BoundaryRule::Reflect(DirectionField::RadialInward),
                t,
                opts,
            )
        }
    }
}

fn regular_truncation_domain(
    a: &DMatrix<f64>,
    policy: &crate::strategies::RegularPolicy,
    t: f64,
) -> Result<Domain> {
    let d = a.nrows();
    let gain = policy.speed.gain(t, d);
    if !crate::linalg::eigenvalues_have_positive_real_part(&gain) {
        return Err(Error::Unsupported(
            "regular policy is not mean-reverting; no stationary distribution to truncate".into(),
        ));
    }
    let c = closed_form::ou_stationary_covariance(&gain, a)?;
    if d == 1 {
        let r = 6.0 * c[(0, 0)].sqrt();
        Ok(Domain::Interval {
            half_width: crate::sde::ScalarFn::constant(r),
        })
    } else {
        // axis-aligned ellipsoid at 6 marginal standard deviations
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = 1.0 / (36.0 * c[(i, i)]);
        }
        Ok(Domain::Ellipsoid {
            matrix: crate::sde::MatrixFn::constant(crate::linalg::SymMat(m)),
        })
    }
}

/// Empirical pair from one unit-scale replication.
fn simulated_pair(
    strategy: &StrategySpec,
    a: &DMatrix<f64>,
    cost: &CostSpec,
    t: f64,
    opts: &SimLimitOptions,
    seed: u64,
) -> Result<(OccupationPair, Option<Domain>)> {
    let d = a.nrows();
    let model = TargetModel::constant(vec![0.0; d], crate::linalg::SymMat(a.clone()))?;
    let scaling = crate::cost::derive_exponents(0.25, cost)?;
    let sim = SimOptions::with_n_sub(opts.n_sub);
    let (path, domain) = match strategy {
        StrategySpec::Impulse(tr) => {
            let frozen = freeze_impulse(tr, t);
            (
                run_impulse(&frozen, &model, &scaling, 1.0, opts.horizon, seed, &sim)?,
                Some(frozen.domain.clone()),
            )
        }
        StrategySpec::Singular(tr) => {
            let frozen = freeze_singular(tr, t);
            (
                run_singular(&frozen, &model, &scaling, 1.0, opts.horizon, seed, &sim)?,
                Some(frozen.domain.clone()),
            )
        }
        StrategySpec::Regular(p) => {
            let frozen = crate::strategies::RegularPolicy {
                speed: freeze_field(&p.speed, t),
                lyapunov: p.lyapunov.clone(),
                theta: p.theta,
                big_theta: p.big_theta,
            };
            let dom = regular_truncation_domain(a, &frozen, t)?;
            (
                run_regular(&frozen, &model, &scaling, 1.0, opts.horizon, seed, &sim)?,
                Some(dom),
            )
        }
    };
    let dom_for_grid = domain.as_ref().expect("domain always set above");
    let grid = GridSpec::for_domain(dom_for_grid, t, opts.bins, opts.boundary_bins);
    let pair = empirical_occupation(&path, opts.burn_in, &grid, domain.as_ref())?;
    Ok((pair, domain))
}

fn freeze_field(f: &FeedbackField, t: f64) -> FeedbackField {
    match f {
        FeedbackField::Zero => FeedbackField::Zero,
        FeedbackField::Linear { matrix } => FeedbackField::Linear {
            matrix: crate::sde::MatrixFn::constant(crate::linalg::SymMat(matrix.eval(t))),
        },
    }
}

fn freeze_domain(d: &Domain, t: f64) -> Domain {
    match d {
        Domain::Interval { half_width } => Domain::Interval {
            half_width: crate::sde::ScalarFn::constant(half_width.eval(t)),
        },
        Domain::Ellipsoid { matrix } => Domain::Ellipsoid {
            matrix: crate::sde::MatrixFn::constant(crate::linalg::SymMat(matrix.eval(t))),
        },
    }
}

fn freeze_impulse(
    tr: &crate::strategies::ImpulseTriplet,
    t: f64,
) -> crate::strategies::ImpulseTriplet {
    crate::strategies::ImpulseTriplet {
        speed: freeze_field(&tr.speed, t),
        domain: freeze_domain(&tr.domain, t),
        jump: match &tr.jump {
            JumpRule::Proportional { alpha } => JumpRule::Proportional {
                alpha: crate::sde::ScalarFn::constant(alpha.eval(t)),
            },
        },
        potential: tr.potential.clone(),
    }
}

fn freeze_singular(
    tr: &crate::strategies::SingularTriplet,
    t: f64,
) -> crate::strategies::SingularTriplet {
    crate::strategies::SingularTriplet {
        speed: freeze_field(&tr.speed, t),
        domain: freeze_domain(&tr.domain, t),
        direction: tr.direction,
        potential: tr.potential.clone(),
    }
}

/// Closed-form limit cost for the explicitly solvable families; errors for
/// anything outside the catalog.
pub fn closed_form_limit(
    a: &DMatrix<f64>,
    strategy: &StrategySpec,
    cost: &CostSpec,
    t: f64,
) -> Result<LimitCostEstimate> {
    let (r, l, k, h) = (
        cost.r.eval(t),
        cost.l.eval(t),
        cost.k.eval(t),
        cost.h.eval(t),
    );
    match strategy {
        StrategySpec::Regular(p) => {
            let d = a.nrows();
            let gain = p.speed.gain(t, d);
            let (sd, sq) = match (&cost.deviation, &cost.regular) {
                (CostFn::Quadratic { matrix: md }, CostFn::Quadratic { matrix: mq }) => {
                    (md.0.clone(), mq.0.clone())
                }
                _ => {
                    return Err(Error::Unsupported(
                        "closed-form regular limit needs quadratic D and Q".into(),
                    ))
                }
            };
            if !crate::linalg::eigenvalues_have_positive_real_part(&gain) {
                return Err(Error::Unsupported(
                    "feedback gain is not stabilizing".into(),
                ));
            }
            let c = closed_form::ou_stationary_covariance(&gain, a)?;
            let deviation_term = r * (&sd * &c).trace();
            let regular_term = l * (gain.transpose() * &sq * &gain * &c).trace();
            Ok(LimitCostEstimate {
                total: deviation_term + regular_term,
                deviation_term,
                regular_term,
                fixed_term: 0.0,
                proportional_term: 0.0,
                std_error: None,
            })
        }
        StrategySpec::Impulse(tr) => {
            let (l_half, alpha) = match (&tr.domain, &tr.jump) {
                (Domain::Interval { half_width }, JumpRule::Proportional { alpha }) => {
                    (half_width.eval(t), alpha.eval(t))
                }
                _ => {
                    return Err(Error::Unsupported(
                        "closed-form impulse limit needs a 1D interval domain".into(),
                    ))
                }
            };
            if a.nrows() != 1 || !tr.speed.is_zero() || (alpha - 1.0).abs() > 1e-12 {
                return Err(Error::Unsupported(
                    "closed-form impulse limit needs d=1, U≡0 and center jumps".into(),
                ));
            }
            let av = a[(0, 0)];
            if av == 0.0 {
                // no motion: the deviation never leaves the center
                return Ok(LimitCostEstimate::zero());
            }
            let sd = match &cost.deviation {
                CostFn::Quadratic { matrix } => matrix.0[(0, 0)],
                _ => {
                    return Err(Error::Unsupported(
                        "closed-form impulse limit needs quadratic D".into(),
                    ))
                }
            };
            // triangular stationary density (L - |y|)/L², renewal rate a/L²
            let nu = av / (l_half * l_half);
            let deviation_term = r * sd * l_half * l_half / 6.0;
            let xi = DVector::from_vec(vec![l_half]);
            let fixed_term = k * cost.fixed.eval(xi.as_slice()) * nu;
            let proportional_term = h * cost.proportional.eval(xi.as_slice()) * nu;
            Ok(LimitCostEstimate {
                total: deviation_term + fixed_term + proportional_term,
                deviation_term,
                regular_term: 0.0,
                fixed_term,
                proportional_term,
                std_error: None,
            })
        }
        StrategySpec::Singular(tr) => {
            let l_half = match &tr.domain {
                Domain::Interval { half_width } => half_width.eval(t),
                _ => {
                    return Err(Error::Unsupported(
                        "closed-form singular limit needs a 1D interval domain".into(),
                    ))
                }
            };
            if a.nrows() != 1 || !tr.speed.is_zero() {
                return Err(Error::Unsupported(
                    "closed-form singular limit needs d=1 and U≡0".into(),
                ));
            }
            let av = a[(0, 0)];
            if av == 0.0 {
                return Ok(LimitCostEstimate::zero());
            }
            let sd = match &cost.deviation {
                CostFn::Quadratic { matrix } => matrix.0[(0, 0)],
                _ => {
                    return Err(Error::Unsupported(
                        "closed-form singular limit needs quadratic D".into(),
                    ))
                }
            };
            // uniform stationary density, local-time rate a/(2L)
            let rho = av / (2.0 * l_half);
            let deviation_term = r * sd * l_half * l_half / 3.0;
            let gamma = DVector::from_vec(vec![1.0]);
            let proportional_term = h * cost.proportional.eval(gamma.as_slice()) * rho;
            Ok(LimitCostEstimate {
                total: deviation_term + proportional_term,
                deviation_term,
                regular_term: 0.0,
                fixed_term: 0.0,
                proportional_term,
                std_error: None,
            })
        }
    }
}

/// The pointwise limit cost `c(a_t, strategy_t; weights_t)` of the theorems,
/// via the chosen estimator.
pub fn limit_cost(
    a: &DMatrix<f64>,
    strategy: &StrategySpec,
    cost: &CostSpec,
    t: f64,
    estimator: &LimitEstimator,
) -> Result<LimitCostEstimate> {
    match estimator {
        LimitEstimator::ClosedForm => closed_form_limit(a, strategy, cost, t),
        LimitEstimator::Oracle { bins } => {
            let sol = oracle_pair_for(a, strategy, t, &OracleOptions::with_bins(*bins))?;
            Ok(integrate_pair_cost(&sol.pair, strategy, cost, t))
        }
        LimitEstimator::Simulation(opts) => simulation_limit(a, strategy, cost, t, opts),
        LimitEstimator::Cross { bins, sim } => {
            let sol = oracle_pair_for(a, strategy, t, &OracleOptions::with_bins(*bins))?;
            let c_oracle = integrate_pair_cost(&sol.pair, strategy, cost, t);
            let coarse = oracle_pair_for(
                a,
                strategy,
                t,
                &OracleOptions::with_bins((*bins / 2).max(20)),
            )?;
            let c_coarse = integrate_pair_cost(&coarse.pair, strategy, cost, t);
            let bias = (c_oracle.total - c_coarse.total).abs();
            let c_sim = simulation_limit(a, strategy, cost, t, sim)?;
            let se = c_sim.std_error.unwrap_or(0.0);
            let allowance = 3.0 * (se + bias) + 1e-9;
            if (c_oracle.total - c_sim.total).abs() > allowance {
                return Err(Error::EstimatorDisagreement {
                    oracle: c_oracle.total,
                    simulation: c_sim.total,
                    allowance,
                });
            }
            Ok(LimitCostEstimate {
                std_error: c_sim.std_error,
                ..c_oracle
            })
        }
    }
}

fn simulation_limit(
    a: &DMatrix<f64>,
    strategy: &StrategySpec,
    cost: &CostSpec,
    t: f64,
    opts: &SimLimitOptions,
) -> Result<LimitCostEstimate> {
    let estimates: Result<Vec<LimitCostEstimate>> = (0..opts.reps.max(1))
        .into_par_iter()
        .map(|rep| {
            let seed = mix_seed(opts.base_seed, 0x0cc0, rep as u64);
            let (pair, _) = simulated_pair(strategy, a, cost, t, opts, seed)?;
            Ok(integrate_pair_cost(&pair, strategy, cost, t))
        })
        .collect();
    let estimates = estimates?;
    let n = estimates.len() as f64;
    let mut mean = LimitCostEstimate::zero();
    for e in &estimates {
        mean.total += e.total / n;
        mean.deviation_term += e.deviation_term / n;
        mean.regular_term += e.regular_term / n;
        mean.fixed_term += e.fixed_term / n;
        mean.proportional_term += e.proportional_term / n;
    }
    let var = estimates
        .iter()
        .map(|e| (e.total - mean.total).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    mean.std_error = Some((var / n).sqrt());
    Ok(mean)
}

/// `∫_0^T c(a_t, …) dt` by trapezoid quadrature; collapses to `T · c` when
/// every ingredient is time-invariant.
pub fn integrate_limit_over_time(
    model: &TargetModel,
    strategy: &StrategySpec,
    cost: &CostSpec,
    horizon: f64,
    n_time_points: usize,
    estimator: &LimitEstimator,
) -> Result<LimitCostEstimate> {
    if horizon == 0.0 {
        return Ok(LimitCostEstimate::zero());
    }
    if matches!(
        model.diffusion,
        crate::sde::DiffusionSpec::FactorScaled { .. }
    ) {
        return Err(Error::Unsupported(
            "limit integration needs deterministic coefficients".into(),
        ));
    }
    let a_at = |t: f64| model.diffusion.eval(t, 0.0);
    let weights_constant = cost.r.is_constant()
        && cost.l.is_constant()
        && cost.k.is_constant()
        && cost.h.is_constant();
    if model.is_time_invariant() && strategy.is_time_invariant() && weights_constant {
        let c = limit_cost(&a_at(0.0), strategy, cost, 0.0, estimator)?;
        return Ok(LimitCostEstimate {
            total: c.total * horizon,
            deviation_term: c.deviation_term * horizon,
            regular_term: c.regular_term * horizon,
            fixed_term: c.fixed_term * horizon,
            proportional_term: c.proportional_term * horizon,
            std_error: c.std_error.map(|s| s * horizon),
        });
    }
    let n = n_time_points.max(2);
    let dt = horizon / (n - 1) as f64;
    let mut acc = LimitCostEstimate::zero();
    let mut se_sq = 0.0;
    for i in 0..n {
        let t = i as f64 * dt;
        let c = limit_cost(&a_at(t), strategy, cost, t, estimator)?;
        let w = if i == 0 || i == n - 1 { 0.5 * dt } else { dt };
        acc.total += w * c.total;
        acc.deviation_term += w * c.deviation_term;
        acc.regular_term += w * c.regular_term;
        acc.fixed_term += w * c.fixed_term;
        acc.proportional_term += w * c.proportional_term;
        if let Some(s) = c.std_error {
            se_sq += (w * s).powi(2);
        }
    }
    acc.std_error = if se_sq > 0.0 {
        Some(se_sq.sqrt())
    } else {
        None
    };
    Ok(acc)
}

/// Multiple power-iteration runs from random starting distributions; returns
/// the max pairwise ℓ¹ distance between the stationary vectors (a numerical
/// uniqueness witness).
pub fn uniqueness_probe(
    a: &DMatrix<f64>,
    strategy: &StrategySpec,
    t: f64,
    bins: usize,
    n_starts: usize,
) -> Result<f64> {
    let mut solutions = Vec::new();
    for s in 0..n_starts.max(2) {
        let opts = OracleOptions {
            start_seed: Some(1000 + s as u64),
            ..OracleOptions::with_bins(bins)
        };
        let sol = oracle_pair_for(a, strategy, t, &opts)?;
        solutions.push(sol.pair.interior.mass);
    }
    let mut worst: f64 = 0.0;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let d: f64 = solutions[i]
                .iter()
                .zip(&solutions[j])
                .map(|(x, y)| (x - y).abs())
                .sum();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
