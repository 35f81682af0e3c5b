//! Finite-difference Markov-chain oracle for the stationary pair.
//!
//! The controlled diffusion `½ Σ a_ij ∂²_ij + U·∇` is discretized on a
//! uniform grid (central diffusion, upwind drift). Transitions that would
//! leave the domain are routed through the boundary rule: an impulse chain
//! redeposits the mass at the jump target and counts the flux into ν; a
//! reflecting chain keeps the mass in place and accumulates the would-be
//! displacement into the local-time measure ρ. The stationary distribution
//! of the uniformized chain is found by power iteration; `ν` and `ρ` come
//! out as per-unit-time intensities
//!
//! ```text
//! ν(bin)  =  Σ_states π(s) · exit-rate(s → bin)
//! ρ(bin)  =  Σ_states π(s) · exit-rate(s → bin) · arm-length(s → bin)
//! ```
//!
//! In 2D, boundary-adjacent arms are shortened to the actual cut distance
//! θh (Shortley–Weller coefficients), which removes the O(h) staircase bias
//! of a plain lattice discretization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::strategies::{DirectionField, Domain, FeedbackField, JumpRule};
use crate::{Error, Result};

use super::{
    boundary_bin_index, boundary_bin_points, BoundaryBin, GridSpec, Histogram, OccupationPair,
};

/// Boundary behaviour of the discretized chain.
#[derive(Debug, Clone)]
pub enum BoundaryRule {
    Jump(JumpRule),
    Reflect(DirectionField),
}

/// Oracle configuration.
#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Grid intervals across the domain diameter (≥ 20).
    pub bins: usize,
    /// Angular boundary bins in 2D (1D always uses the two endpoints).
    pub boundary_bins: usize,
    /// Target accuracy of the stationary vector in ℓ¹ (distance to the
    /// fixed point, estimated from the contraction rate).
    pub tol: f64,
    pub max_iters: usize,
    /// Random starting distribution for uniqueness probes; `None` starts
    /// from the grid center.
    pub start_seed: Option<u64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            bins: 200,
            boundary_bins: 32,
            tol: 1e-10,
            max_iters: 50_000_000,
            start_seed: None,
        }
    }
}

impl OracleOptions {
    pub fn with_bins(bins: usize) -> Self {
        OracleOptions {
            bins,
            ..Default::default()
        }
    }
}

/// Converged stationary pair plus iteration diagnostics.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub pair: OccupationPair,
    pub iterations: usize,
    /// Final estimated ℓ¹ distance to the fixed point.
    pub err_estimate: f64,
    /// Estimated per-step contraction factor (subdominant eigenvalue).
    pub contraction: f64,
}

// sparse row-major transition structure of the uniformized chain
struct Chain {
    n: usize,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    probs: Vec<f64>,
    stay: Vec<f64>,
    /// per-state boundary flux channels: (state, rate, boundary bin, arm length)
    exits: Vec<(u32, f64, u32, f64)>,
}

/// Builds the chain and solves for the stationary pair.
pub fn markov_chain_oracle(
    a: &DMatrix<f64>,
    speed: &FeedbackField,
    domain: &Domain,
    rule: &BoundaryRule,
    t: f64,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    let d = a.nrows();
    if d > 2 {
        return Err(Error::Unsupported("oracle supports d <= 2".into()));
    }
    if opts.bins < 20 {
        return Err(Error::Unsupported(
            "oracle needs at least 20 bins across the domain".into(),
        ));
    }
    match d {
        1 => oracle_1d(a[(0, 0)], speed, domain, rule, t, opts),
        _ => oracle_2d(a, speed, domain, rule, t, opts),
    }
}

// ---------------------------------------------------------------------------
// 1D chain
// ---------------------------------------------------------------------------

fn oracle_1d(
    a: f64,
    speed: &FeedbackField,
    domain: &Domain,
    rule: &BoundaryRule,
    t: f64,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    if a <= 0.0 {
        return Err(Error::NotPositiveDefinite("oracle needs a > 0".into()));
    }
    let l = match domain {
        Domain::Interval { half_width } => half_width.eval(t),
        Domain::Ellipsoid { matrix } => 1.0 / matrix.eval(t)[(0, 0)].sqrt(),
    };
    let n_cells = if opts.bins.is_multiple_of(2) {
        opts.bins
    } else {
        opts.bins + 1
    };
    let h = 2.0 * l / n_cells as f64;
    let is_jump = matches!(rule, BoundaryRule::Jump(_));
    // Jump chain: states on the lattice nodes x_j = -L + j h strictly inside
    // (j = 1..n_cells-1), with the endpoints acting as virtual hitting
    // states. Reflecting chain: cell-centered states x_j = -L + (j+1/2) h
    // (j = 0..n_cells-1), so the uniform stationary vector represents the
    // uniform density with O(h²) quadrature error instead of over-weighting
    // the boundary half-cells.
    let node = |j: usize| -> f64 {
        if is_jump {
            -l + j as f64 * h
        } else {
            -l + (j as f64 + 0.5) * h
        }
    };
    let states: Vec<usize> = if is_jump {
        (1..n_cells).collect()
    } else {
        (0..n_cells).collect()
    };
    let index_of = move |j: usize| -> usize {
        if is_jump {
            j - 1
        } else {
            j
        }
    };
    let n = states.len();

    // rates per state
    let mut rate_left = vec![0.0; n];
    let mut rate_right = vec![0.0; n];
    for (s, &j) in states.iter().enumerate() {
        let x = DVector::from_vec(vec![node(j)]);
        let u = speed.eval(t, &x)[0];
        rate_left[s] = a / (2.0 * h * h) + (-u).max(0.0) / h;
        rate_right[s] = a / (2.0 * h * h) + u.max(0.0) / h;
    }
    let max_rate = (0..n)
        .map(|s| rate_left[s] + rate_right[s])
        .fold(0.0f64, f64::max);
    // slightly lazy uniformization keeps the chain aperiodic
    let dt = 0.95 / max_rate;

    let mut offsets: Vec<u32> = Vec::with_capacity(n + 1);
    let mut targets: Vec<u32> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut stay = vec![0.0; n];
    let mut exits: Vec<(u32, f64, u32, f64)> = Vec::new();

    let deposit_nodes = |y: f64| -> Vec<(usize, f64)> {
        // linear split of the jump target over the two surrounding interior nodes
        let pos = ((y + l) / h).clamp(1.0, (n_cells - 1) as f64);
        let j0 = (pos.floor() as usize).clamp(1, n_cells - 1);
        let j1 = (j0 + 1).min(n_cells - 1);
        let w = (pos - j0 as f64).clamp(0.0, 1.0);
        if j0 == j1 || w == 0.0 {
            vec![(j0, 1.0)]
        } else {
            vec![(j0, 1.0 - w), (j1, w)]
        }
    };

    for (s, &j) in states.iter().enumerate() {
        offsets.push(targets.len() as u32);
        let mut total = 0.0;
        for (dir, rate) in [(-1isize, rate_left[s]), (1isize, rate_right[s])] {
            if rate == 0.0 {
                continue;
            }
            total += rate;
            let jn = j as isize + dir;
            let outward = if is_jump {
                false
            } else {
                jn < 0 || jn >= n_cells as isize
            };
            if outward {
                // reflecting chain: the outward move from a boundary cell
                // stays put and its would-be displacement feeds the
                // local-time measure at the adjacent boundary point
                let bin = if node(j) >= 0.0 { 1 } else { 0 };
                exits.push((s as u32, rate, bin, h));
                stay[s] += rate * dt;
                continue;
            }
            let jn = jn as usize;
            let hits_virtual_boundary = is_jump && (jn == 0 || jn == n_cells);
            if !hits_virtual_boundary {
                targets.push(index_of(jn) as u32);
                probs.push(rate * dt);
                continue;
            }
            let jr = match rule {
                BoundaryRule::Jump(jr) => jr,
                BoundaryRule::Reflect(_) => unreachable!(),
            };
            let xb = node(jn);
            let bin = if xb >= 0.0 { 1 } else { 0 };
            exits.push((s as u32, rate, bin, h));
            let xbv = DVector::from_vec(vec![xb]);
            let y = xb + jr.xi(t, &xbv)[0];
            for (jd, w) in deposit_nodes(y) {
                targets.push(index_of(jd) as u32);
                probs.push(rate * dt * w);
            }
        }
        stay[s] += 1.0 - total * dt;
    }
    offsets.push(targets.len() as u32);

    let chain = Chain {
        n,
        offsets,
        targets,
        probs,
        stay,
        exits,
    };
    let start_state = index_of(n_cells / 2);
    let (pi, iterations, err_estimate, contraction) = stationary(&chain, start_state, opts)?;

    // histogram cells centered on the chain states
    let (grid, mass) = if is_jump {
        let grid = GridSpec {
            lo: vec![-l + 0.5 * h],
            hi: vec![l - 0.5 * h],
            bins: vec![n_cells - 1],
            boundary_bins: 2,
        };
        (grid, pi.clone())
    } else {
        let grid = GridSpec {
            lo: vec![-l],
            hi: vec![l],
            bins: vec![n_cells],
            boundary_bins: 2,
        };
        (grid, pi.clone())
    };
    let mut interior = Histogram { grid, mass };
    interior.normalize();

    let mut bins = vec![
        BoundaryBin {
            point: vec![-l],
            mass: 0.0,
        },
        BoundaryBin {
            point: vec![l],
            mass: 0.0,
        },
    ];
    for &(s, rate, bin, arm) in &chain.exits {
        let weight = match rule {
            BoundaryRule::Jump(_) => pi[s as usize] * rate,
            BoundaryRule::Reflect(_) => pi[s as usize] * rate * arm,
        };
        bins[bin as usize].mass += weight;
    }
    let total_boundary_mass = bins.iter().map(|b| b.mass).sum();

    Ok(OracleSolution {
        pair: OccupationPair {
            interior,
            boundary: bins,
            total_boundary_mass,
        },
        iterations,
        err_estimate,
        contraction,
    })
}

// ---------------------------------------------------------------------------
// 2D chain with cut cells
// ---------------------------------------------------------------------------

fn oracle_2d(
    a: &DMatrix<f64>,
    speed: &FeedbackField,
    domain: &Domain,
    rule: &BoundaryRule,
    t: f64,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    if a[(0, 1)].abs() > 1e-12 {
        return Err(Error::Unsupported(
            "2D oracle supports diagonal diffusion matrices".into(),
        ));
    }
    let half = domain.bounding_half_widths(t);
    let diameter = 2.0 * half.iter().cloned().fold(0.0f64, f64::max);
    let h = diameter / opts.bins as f64;
    // symmetric node lattice containing the origin
    let cx = (half[0] / h).ceil() as isize + 1;
    let cy = (half[1] / h).ceil() as isize + 1;
    let nx = (2 * cx + 1) as usize;
    let ny = (2 * cy + 1) as usize;
    let node = |i: isize, j: isize| -> (f64, f64) { ((i - cx) as f64 * h, (j - cy) as f64 * h) };

    // active states = nodes strictly inside G
    let mut state_of = vec![u32::MAX; nx * ny];
    let mut coords: Vec<(isize, isize)> = Vec::new();
    for i in 0..nx as isize {
        for j in 0..ny as isize {
            let (x, y) = node(i, j);
            if domain.contains(t, &[x, y]) {
                state_of[(i as usize) * ny + j as usize] = coords.len() as u32;
                coords.push((i, j));
            }
        }
    }
    let n = coords.len();
    if n < 25 {
        return Err(Error::Unsupported(
            "2D oracle grid too coarse for this domain".into(),
        ));
    }

    let theta_min = 0.3;
    let is_jump = matches!(rule, BoundaryRule::Jump(_));
    let n_bbins = opts.boundary_bins.max(8);
    let bin_points = boundary_bin_points(domain, t, n_bbins);

    // per-state arm description: (rate, target state or boundary, arm length, boundary point)
    struct Arm {
        rate: f64,
        target: Option<u32>,
        arm: f64,
        bpoint: Option<(f64, f64)>,
    }

    let mut all_arms: Vec<Vec<Arm>> = Vec::with_capacity(n);
    let mut max_rate = 0.0f64;
    for &(i, j) in &coords {
        let (x, y) = node(i, j);
        let xv = DVector::from_vec(vec![x, y]);
        let u = speed.eval(t, &xv);
        let mut arms = Vec::with_capacity(4);
        // axis arms with cut lengths
        let arm_info = |axis: usize, dir: f64| -> Arm {
            let (ni, nj) = match (axis, dir > 0.0) {
                (0, true) => (i + 1, j),
                (0, false) => (i - 1, j),
                (1, true) => (i, j + 1),
                _ => (i, j - 1),
            };
            let inside = ni >= 0
                && nj >= 0
                && (ni as usize) < nx
                && (nj as usize) < ny
                && state_of[(ni as usize) * ny + nj as usize] != u32::MAX;
            if inside {
                Arm {
                    rate: 0.0,
                    target: Some(state_of[(ni as usize) * ny + nj as usize]),
                    arm: h,
                    bpoint: None,
                }
            } else {
                // cut arm: crossing of [p, p + h e_axis] with the boundary
                let mut to = DVector::from_vec(vec![x, y]);
                to[axis] += dir * h;
                let (theta, pb) = domain.segment_crossing(t, &xv, &to);
                let theta = theta.clamp(theta_min, 1.0);
                Arm {
                    rate: 0.0,
                    target: None,
                    arm: theta * h,
                    bpoint: Some((pb[0], pb[1])),
                }
            }
        };
        for axis in 0..2 {
            let mut minus = arm_info(axis, -1.0);
            let mut plus = arm_info(axis, 1.0);
            let (hm, hp) = (minus.arm, plus.arm);
            let aii = a[(axis, axis)];
            minus.rate = aii / (hm * (hm + hp));
            plus.rate = aii / (hp * (hm + hp));
            let ui = u[axis];
            if ui > 0.0 {
                plus.rate += ui / hp;
            } else {
                minus.rate += -ui / hm;
            }
            arms.push(minus);
            arms.push(plus);
        }
        let total: f64 = arms.iter().map(|a| a.rate).sum();
        max_rate = max_rate.max(total);
        all_arms.push(arms);
    }

    let dt = 0.95 / max_rate;
    let mut offsets: Vec<u32> = Vec::with_capacity(n + 1);
    let mut targets: Vec<u32> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut stay = vec![0.0; n];
    let mut exits: Vec<(u32, f64, u32, f64)> = Vec::new();

    // bilinear deposit of a jump target over the surrounding active nodes
    let deposit = |p: (f64, f64)| -> Result<Vec<(u32, f64)>> {
        let gx = p.0 / h + cx as f64;
        let gy = p.1 / h + cy as f64;
        let i0 = gx.floor() as isize;
        let j0 = gy.floor() as isize;
        let (fx, fy) = (gx - i0 as f64, gy - j0 as f64);
        let mut out: Vec<(u32, f64)> = Vec::new();
        let mut dropped = 0.0;
        for (di, dj, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            if w == 0.0 {
                continue;
            }
            let (ii, jj) = (i0 + di, j0 + dj);
            let ok = ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny;
            let sid = if ok {
                state_of[(ii as usize) * ny + jj as usize]
            } else {
                u32::MAX
            };
            if sid == u32::MAX {
                dropped += w;
            } else {
                out.push((sid, w));
            }
        }
        if out.is_empty() {
            return Err(Error::NotAdmissible(
                "jump target fell outside the domain grid".into(),
            ));
        }
        if dropped > 0.0 {
            let keep: f64 = out.iter().map(|(_, w)| w).sum();
            for o in &mut out {
                o.1 /= keep;
            }
        }
        Ok(out)
    };

    for (s, arms) in all_arms.iter().enumerate() {
        offsets.push(targets.len() as u32);
        let mut total = 0.0;
        for arm in arms {
            if arm.rate == 0.0 {
                continue;
            }
            total += arm.rate;
            match arm.target {
                Some(tgt) => {
                    targets.push(tgt);
                    probs.push(arm.rate * dt);
                }
                None => {
                    let pb = arm.bpoint.expect("cut arms carry a boundary point");
                    let bin = boundary_bin_index(domain, t, &[pb.0, pb.1], n_bbins) as u32;
                    exits.push((s as u32, arm.rate, bin, arm.arm));
                    match rule {
                        BoundaryRule::Jump(jr) => {
                            let xbv = DVector::from_vec(vec![pb.0, pb.1]);
                            let target = &xbv + jr.xi(t, &xbv);
                            for (sid, w) in deposit((target[0], target[1]))? {
                                targets.push(sid);
                                probs.push(arm.rate * dt * w);
                            }
                        }
                        BoundaryRule::Reflect(_) => {
                            stay[s] += arm.rate * dt;
                        }
                    }
                }
            }
        }
        stay[s] += 1.0 - total * dt;
    }
    offsets.push(targets.len() as u32);

    let chain = Chain {
        n,
        offsets,
        targets,
        probs,
        stay,
        exits,
    };
    let center = state_of[(cx as usize) * ny + cy as usize];
    if center == u32::MAX {
        return Err(Error::Unsupported("domain must contain the origin".into()));
    }
    let (pi, iterations, err_estimate, contraction) = stationary(&chain, center as usize, opts)?;

    // node-centered histogram over the full lattice box
    let grid = GridSpec {
        lo: vec![-(cx as f64 + 0.5) * h, -(cy as f64 + 0.5) * h],
        hi: vec![(cx as f64 + 0.5) * h, (cy as f64 + 0.5) * h],
        bins: vec![nx, ny],
        boundary_bins: n_bbins,
    };
    let mut mass = vec![0.0; nx * ny];
    for (s, &(i, j)) in coords.iter().enumerate() {
        mass[(i as usize) * ny + j as usize] = pi[s];
    }
    let mut interior = Histogram { grid, mass };
    interior.normalize();

    let mut bins: Vec<BoundaryBin> = bin_points
        .into_iter()
        .map(|point| BoundaryBin { point, mass: 0.0 })
        .collect();
    for &(s, rate, bin, arm) in &chain.exits {
        let weight = if is_jump {
            pi[s as usize] * rate
        } else {
            pi[s as usize] * rate * arm
        };
        bins[bin as usize].mass += weight;
    }
    let total_boundary_mass = bins.iter().map(|b| b.mass).sum();

    Ok(OracleSolution {
        pair: OccupationPair {
            interior,
            boundary: bins,
            total_boundary_mass,
        },
        iterations,
        err_estimate,
        contraction,
    })
}

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

fn stationary(
    chain: &Chain,
    start_state: usize,
    opts: &OracleOptions,
) -> Result<(Vec<f64>, usize, f64, f64)> {
    let n = chain.n;
    let mut cur = vec![0.0; n];
    match opts.start_seed {
        None => cur[start_state] = 1.0,
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for c in cur.iter_mut() {
                *c = rng.gen::<f64>() + 1e-3;
                total += *c;
            }
            for c in cur.iter_mut() {
                *c /= total;
            }
        }
    }
    let mut next = vec![0.0; n];
    let window = 200usize;
    let mut delta_ring = vec![f64::INFINITY; window];
    let mut last_delta = f64::INFINITY;
    let mut contraction = 1.0;
    for it in 1..=opts.max_iters {
        next.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..n {
            let m = cur[s];
            if m == 0.0 {
                continue;
            }
            next[s] += m * chain.stay[s];
            let (lo, hi) = (chain.offsets[s] as usize, chain.offsets[s + 1] as usize);
            for k in lo..hi {
                next[chain.targets[k] as usize] += m * chain.probs[k];
            }
        }
        let mut delta = 0.0;
        for s in 0..n {
            delta += (next[s] - cur[s]).abs();
        }
        std::mem::swap(&mut cur, &mut next);
        last_delta = delta;
        let old = delta_ring[it % window];
        delta_ring[it % window] = delta;
        if delta == 0.0 {
            return Ok((cur, it, 0.0, contraction));
        }
        if it > window && old.is_finite() && old > 0.0 {
            contraction = (delta / old).powf(1.0 / window as f64);
            if it > 2 * window && contraction < 1.0 {
                let err = delta * contraction / (1.0 - contraction);
                if err < opts.tol {
                    return Ok((cur, it, err, contraction));
                }
            }
        }
    }
    Err(Error::PowerIterationFailed {
        iterations: opts.max_iters,
        last_diff: last_delta,
        gap_estimate: 1.0 - contraction,
    })
}
