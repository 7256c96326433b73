//! Brute-force reference implementations for testing.
//!
//! These deliberately avoid the closed-form paths of the main modules: roots
//! come from sweeping the crank angle and Newton refinement, the static gap
//! from marching along the slide ray, energies from finite differences of
//! body positions. They are slow and meant for tests and the `grid` command.

use crate::constraints::DesignEvaluator;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kinematics::kinematic_transform;
use crate::dynamics::torque_profile;
use crate::model::{Branch, DesignParams, EvaluationRecord, MechanismConfig, MotionTask, Pose};
use crate::optimizer::Bounds;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Crank angles tried per revolution before refinement.
pub const IK_SWEEP: usize = 3600;
/// Step of the sampled slide ray (m).
pub const GAP_STEP: f64 = 1e-6;
/// Largest grid resolution accepted per axis.
pub const MAX_GRID_RESOLUTION: usize = 31;

/// A crank angle that closes the loop, with its crank joint position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteRoot {
    pub theta: f64,
    pub point_a: Vec2,
}

fn joint_b(design: &DesignParams, cfg: &MechanismConfig, delta: f64) -> Vec2 {
    let phi = delta - cfg.effector_offset;
    Vec2::new(cfg.pivot_c.x + design.l_bc * phi.cos(), cfg.pivot_c.y + design.l_bc * phi.sin())
}

fn crank_end(design: &DesignParams, cfg: &MechanismConfig, theta: f64) -> Vec2 {
    let o = cfg.pivot_o();
    Vec2::new(o.x + design.l_oa * theta.cos(), o.y + design.l_oa * theta.sin())
}

/// Closure residual `|A(theta) - B| - l_ab` and its derivative.
fn residual(design: &DesignParams, cfg: &MechanismConfig, b: Vec2, theta: f64) -> (f64, f64) {
    let a = crank_end(design, cfg, theta);
    let d = a - b;
    let len = d.norm();
    let da = Vec2::new(-design.l_oa * theta.sin(), design.l_oa * theta.cos());
    (len - design.l_ab, if len > 0.0 { d.dot(da) / len } else { 0.0 })
}

/// Newton iteration kept inside `[lo, hi]` by bisection.
fn refine_bracketed(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo).0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (fx, dfx) = f(x);
        if fx.abs() <= 1e-15 {
            break;
        }
        if (fx < 0.0) == (f_lo < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        x = if dfx != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    x
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// All crank angles that assemble the linkage at effector angle `delta`.
///
/// Roots are found by sign changes and near-zero minima of the closure
/// residual on a uniform sweep, then refined. A tangent root is reported once.
pub fn brute_ik(design: &DesignParams, cfg: &MechanismConfig, delta: f64) -> Vec<BruteRoot> {
    let b = joint_b(design, cfg, delta);
    let f = |theta: f64| residual(design, cfg, b, theta);
    let step = TAU / IK_SWEEP as f64;
    let grid: Vec<(f64, f64)> = (0..=IK_SWEEP)
        .map(|k| {
            let theta = -PI + k as f64 * step;
            (theta, f(theta).0)
        })
        .collect();

    let mut roots: Vec<f64> = Vec::new();
    for k in 0..IK_SWEEP {
        let (t0, f0) = grid[k];
        let (t1, f1) = grid[k + 1];
        if f0 == 0.0 {
            roots.push(t0);
        } else if f0 * f1 < 0.0 {
            roots.push(refine_bracketed(&f, t0, t1));
        }
    }
    // Touching roots: local extrema of the residual that come close to zero.
    let scale = design.l_oa + design.l_ab;
    for k in 1..IK_SWEEP {
        let (fp, fc, fnx) = (grid[k - 1].1, grid[k].1, grid[k + 1].1);
        let is_min = fc.abs() <= fp.abs() && fc.abs() <= fnx.abs();
        if !is_min || fp * fc <= 0.0 || fc * fnx <= 0.0 {
            continue;
        }
        let slope = |theta: f64| {
            let h = 1e-7;
            (f(theta).1, (f(theta + h).1 - f(theta - h).1) / (2.0 * h))
        };
        let theta = refine_bracketed(slope, grid[k - 1].0, grid[k + 1].0);
        if f(theta).0.abs() <= 1e-9 * scale {
            roots.push(theta);
        }
    }

    let mut unique: Vec<f64> = Vec::new();
    for r in roots.into_iter().map(wrap) {
        if !unique.iter().any(|u| angular_distance(*u, r) < 1e-6) {
            unique.push(r);
        }
    }
    unique.sort_by(f64::total_cmp);
    unique.into_iter().map(|theta| BruteRoot { theta, point_a: crank_end(design, cfg, theta) }).collect()
}

/// Root that continues from `theta_prev` by Newton iteration, with a full
/// sweep as fallback.
fn track_root(design: &DesignParams, cfg: &MechanismConfig, delta: f64, theta_prev: f64) -> Option<f64> {
    let b = joint_b(design, cfg, delta);
    let mut theta = theta_prev;
    for _ in 0..50 {
        let (fx, dfx) = residual(design, cfg, b, theta);
        if fx.abs() <= 1e-14 {
            if (theta - theta_prev).abs() < 0.2 {
                return Some(theta);
            }
            break;
        }
        if dfx == 0.0 {
            break;
        }
        theta -= fx / dfx;
    }
    let nearest = brute_ik(design, cfg, delta)
        .into_iter()
        .min_by(|a, b| angular_distance(a.theta, theta_prev).total_cmp(&angular_distance(b.theta, theta_prev)))?;
    Some(theta_prev + wrap(nearest.theta - theta_prev))
}

fn branch_of(cfg: &MechanismConfig, b: Vec2, a: Vec2) -> Branch {
    let o = cfg.pivot_o();
    Branch::from_sign((b - o).cross(a - o))
}

/// Root at `delta` on the requested coupler branch.
pub fn brute_ik_on_branch(design: &DesignParams, cfg: &MechanismConfig, delta: f64, branch: Branch) -> Option<BruteRoot> {
    let b = joint_b(design, cfg, delta);
    brute_ik(design, cfg, delta).into_iter().find(|r| branch_of(cfg, b, r.point_a) == branch)
}

fn rotate_towards(from: Vec2, to: Vec2, length: f64, turn: f64) -> Vec2 {
    let base = (to - from).angle();
    from + Vec2::from_angle(base + turn) * length
}

/// Static constraint by marching the detached crank end towards O.
///
/// The baseline's absolute bar directions at the pose are measured from its
/// swept root; the new chain is laid out with the same turns between bars.
pub fn brute_static_gap(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask, pose: Pose) -> Result<f64> {
    let delta = task.delta(pose);
    let base = &cfg.baseline;
    let root = brute_ik_on_branch(base, cfg, delta, cfg.branch).ok_or(Error::BaselineInfeasible { delta })?;
    let (o, c) = (cfg.pivot_o(), cfg.pivot_c);
    let b0 = joint_b(base, cfg, delta);
    let a0 = root.point_a;
    let turn_b = (a0 - b0).angle() - (c - b0).angle();
    let turn_a = (o - a0).angle() - (b0 - a0).angle();

    let b = joint_b(design, cfg, delta);
    let a = rotate_towards(b, c, design.l_ab, turn_b);
    let o_init = rotate_towards(a, b, design.l_oa, turn_a);

    let r_in = (design.l_ab - design.l_oa).abs();
    let r_out = design.l_ab + design.l_oa;
    let inside = |p: Vec2| {
        let r = p.distance(b);
        r <= r_out && r >= r_in
    };
    let cap = cfg.overshoot_cap;
    let s_o = o.distance(o_init);
    if s_o < 1e-9 {
        let dir = (o - b).normalized();
        let travel = march(|s| inside(o + dir * s), cap);
        return Ok(-travel);
    }
    let dir = (o - o_init) * (1.0 / s_o);
    let s_final = march(|s| inside(o_init + dir * s), s_o + cap);
    Ok(s_o - s_final)
}

/// Distance travelled before the first sample outside the region, at
/// [`GAP_STEP`] resolution, or `limit` if the region is never left.
fn march(inside: impl Fn(f64) -> bool, limit: f64) -> f64 {
    let coarse = 10.0 * GAP_STEP;
    let mut s = 0.0;
    // The start may sit on the boundary; the first step decides the direction.
    while s < limit {
        let next = (s + coarse).min(limit);
        if !inside(next) {
            let mut fine = s;
            while fine < next {
                let trial = (fine + GAP_STEP).min(next);
                if !inside(trial) {
                    return 0.5 * (fine + trial);
                }
                fine = trial;
            }
            return next;
        }
        s = next;
    }
    limit
}

/// Crank angles along an effector sweep, continued from the configured
/// branch at the stroke midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub deltas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub monotonic: bool,
    /// Crank angle range covered by steps against the net direction.
    pub reversal_range: f64,
}

/// Follows the crank angle over `deltas` (ordered along the stroke) starting
/// from the entry closest to `delta_seed`. `None` when the sweep cannot be
/// assembled somewhere.
pub fn brute_theta_sweep(
    design: &DesignParams,
    cfg: &MechanismConfig,
    deltas: &[f64],
    delta_seed: f64,
) -> Option<SweepReport> {
    let seed_index = (0..deltas.len()).min_by(|&i, &j| {
        (deltas[i] - delta_seed).abs().total_cmp(&(deltas[j] - delta_seed).abs())
    })?;
    let seed = brute_ik_on_branch(design, cfg, deltas[seed_index], cfg.branch)?;
    let mut thetas = vec![seed.theta; deltas.len()];
    for range in [(0..seed_index).rev().collect::<Vec<_>>(), (seed_index + 1..deltas.len()).collect()] {
        let mut prev = seed.theta;
        for k in range {
            prev = track_root(design, cfg, deltas[k], prev)?;
            thetas[k] = prev;
        }
    }
    let steps: Vec<f64> = thetas.windows(2).map(|w| w[1] - w[0]).collect();
    let monotonic = steps.iter().all(|&d| d >= 0.0) || steps.iter().all(|&d| d <= 0.0);
    let net = thetas[thetas.len() - 1] - thetas[0];
    let reference = if net != 0.0 { net.signum() } else { steps.iter().find(|d| **d != 0.0).map_or(1.0, |d| d.signum()) };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, d) in steps.iter().enumerate() {
        if d * reference < 0.0 {
            lo = lo.min(thetas[k].min(thetas[k + 1]));
            hi = hi.max(thetas[k].max(thetas[k + 1]));
        }
    }
    let reversal_range = if hi >= lo { hi - lo } else { 0.0 };
    Some(SweepReport { deltas: deltas.to_vec(), thetas, monotonic, reversal_range })
}

/// `n` evenly spaced effector angles from `delta_e` to `delta_i`, merged with `extra`.
pub fn dense_stroke(task: &MotionTask, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut deltas: Vec<f64> = (0..n)
        .map(|k| task.delta_e + (task.delta_i - task.delta_e) * k as f64 / (n - 1) as f64)
        .chain(extra.iter().copied())
        .collect();
    let forward = task.delta_i > task.delta_e;
    deltas.sort_by(|a, b| if forward { a.total_cmp(b) } else { b.total_cmp(a) });
    deltas.dedup();
    deltas
}

/// Grid coordinates of `resolution` points per axis spanning the box.
pub fn grid_axes(bounds: &Bounds, resolution: usize) -> Vec<Vec<f64>> {
    (0..bounds.dim())
        .map(|k| {
            (0..resolution)
                .map(|i| {
                    if resolution == 1 {
                        0.5 * (bounds.lo[k] + bounds.hi[k])
                    } else {
                        bounds.lo[k] + bounds.width(k) * i as f64 / (resolution - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Evaluates every design of the tensor grid `axes` (l_oa, l_ab, l_bc).
///
/// Records are ordered with l_bc varying fastest.
pub fn grid_sweep_axes(cfg: &MechanismConfig, task: &MotionTask, axes: &[Vec<f64>]) -> Result<Vec<EvaluationRecord>> {
    if axes.len() != 3 || axes.iter().any(|a| a.is_empty() || a.len() > MAX_GRID_RESOLUTION) {
        return Err(Error::validation(
            "resolution",
            format!("need 3 axes with 1 to {MAX_GRID_RESOLUTION} points each"),
        ));
    }
    let evaluator = DesignEvaluator::new(cfg, task)?;
    let mut designs = Vec::with_capacity(axes[0].len() * axes[1].len() * axes[2].len());
    for &l_oa in &axes[0] {
        for &l_ab in &axes[1] {
            for &l_bc in &axes[2] {
                designs.push(DesignParams::from_array([l_oa, l_ab, l_bc]));
            }
        }
    }
    #[cfg(feature = "parallel")]
    let records = {
        use rayon::prelude::*;
        designs.par_iter().map(|d| evaluator.evaluate(d)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records = designs.iter().map(|d| evaluator.evaluate(d)).collect();
    Ok(records)
}

/// Exhaustive evaluation on a `resolution`-per-axis grid over the box.
pub fn grid_sweep(cfg: &MechanismConfig, task: &MotionTask, bounds: &Bounds, resolution: usize) -> Result<Vec<EvaluationRecord>> {
    grid_sweep_axes(cfg, task, &grid_axes(bounds, resolution))
}

/// Best feasible record with a known objective.
pub fn best_feasible(records: &[EvaluationRecord]) -> Option<&EvaluationRecord> {
    records
        .iter()
        .filter(|r| r.constraints.feasible && r.objective.is_some())
        .min_by(|a, b| a.objective.unwrap().total_cmp(&b.objective.unwrap()))
}

/// Which constraint decides a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Feasible,
    /// The chain does not close at one or both stroke ends.
    Static,
    /// Closes at both ends but reverses the crank or cannot pass through the stroke.
    Dynamic,
}

impl CellClass {
    pub fn of(record: &EvaluationRecord) -> Self {
        let c = &record.constraints;
        if c.c_static_i > 0.0 || c.c_static_e > 0.0 {
            CellClass::Static
        } else if c.feasible {
            CellClass::Feasible
        } else {
            CellClass::Dynamic
        }
    }

    pub fn symbol(self) -> char {
        match self {
            CellClass::Feasible => '#',
            CellClass::Static => '.',
            CellClass::Dynamic => 'x',
        }
    }
}

/// Feasibility map over (l_oa, l_ab) at a fixed l_bc.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeasibilitySlice {
    pub l_oa: Vec<f64>,
    pub l_ab: Vec<f64>,
    pub l_bc: f64,
    /// `cells[i][j]` belongs to `l_oa[i]`, `l_ab[j]`.
    pub cells: Vec<Vec<CellClass>>,
}

impl FeasibilitySlice {
    /// Text rendering with l_ab growing to the right and l_oa growing downwards.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.cells {
            out.extend(row.iter().map(|c| c.symbol()));
            out.push('\n');
        }
        out
    }

    /// Number of 4-connected feasible components.
    pub fn feasible_components(&self) -> usize {
        let (n, m) = (self.cells.len(), self.cells.first().map_or(0, Vec::len));
        let mut seen = vec![vec![false; m]; n];
        let mut count = 0;
        for i in 0..n {
            for j in 0..m {
                if seen[i][j] || self.cells[i][j] != CellClass::Feasible {
                    continue;
                }
                count += 1;
                let mut stack = vec![(i, j)];
                seen[i][j] = true;
                while let Some((r, c)) = stack.pop() {
                    let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
                    for (nr, nc) in neighbours {
                        if nr < n && nc < m && !seen[nr][nc] && self.cells[nr][nc] == CellClass::Feasible {
                            seen[nr][nc] = true;
                            stack.push((nr, nc));
                        }
                    }
                }
            }
        }
        count
    }
}

/// Classifies a 2D slice of the design space at fixed `l_bc`.
pub fn feasibility_slice(
    cfg: &MechanismConfig,
    task: &MotionTask,
    l_oa: &[f64],
    l_ab: &[f64],
    l_bc: f64,
) -> Result<FeasibilitySlice> {
    let evaluator = DesignEvaluator::new(cfg, task)?;
    let cells = l_oa
        .iter()
        .map(|&a| {
            l_ab.iter()
                .map(|&b| CellClass::of(&evaluator.evaluate(&DesignParams::from_array([a, b, l_bc]))))
                .collect()
        })
        .collect();
    Ok(FeasibilitySlice { l_oa: l_oa.to_vec(), l_ab: l_ab.to_vec(), l_bc, cells })
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson's rule needs an odd number of samples");
    let inner: f64 = values[1..n - 1].iter().enumerate().map(|(k, v)| if k % 2 == 0 { 4.0 * v } else { 2.0 * v }).sum();
    h / 3.0 * (values[0] + inner + values[n - 1])
}

/// RMS torque by Simpson's rule on `n_fine` (odd) samples per stroke.
pub fn refined_rms(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask, n_fine: usize) -> Result<f64> {
    let fine = MotionTask { n_samples: n_fine, ..task.clone() };
    let trajectory = kinematic_transform(design, cfg, &fine)?;
    let profile = torque_profile(design, cfg, &fine, &trajectory)?;
    let s = &profile.samples;
    let n = n_fine;
    let forward: Vec<f64> = s[..n].iter().map(|p| p.1 * p.1).collect();
    let back_start = if task.t_dwell > 0.0 { n + 1 } else { n - 1 };
    let backward: Vec<f64> = s[back_start..back_start + n].iter().map(|p| p.1 * p.1).collect();
    let h = task.t_move / (n - 1) as f64;
    let hold_i = s[n - 1].1;
    let hold_e = s[back_start + n - 1].1;
    let integral = simpson(&forward, h) + simpson(&backward, h) + task.t_dwell * (hold_i * hold_i + hold_e * hold_e);
    Ok((integral / task.t_cycle()).sqrt())
}

/// Effector angle of the forward stroke at time `t`, with a minimum-jerk profile.
fn stroke_angle(task: &MotionTask, t: f64) -> f64 {
    let tau = (t / task.t_move).clamp(0.0, 1.0);
    let s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
    task.delta_e + (task.delta_i - task.delta_e) * s
}

/// Positions and orientations of every mass element at time `t`.
struct Snapshot {
    /// (mass, center position, moment of inertia about center, orientation)
    parts: Vec<(f64, Vec2, f64, f64)>,
    theta: f64,
}

fn snapshot(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask, t: f64, theta_near: f64) -> Option<Snapshot> {
    let delta = stroke_angle(task, t);
    let theta = track_root(design, cfg, delta, theta_near)?;
    let o = cfg.pivot_o();
    let c = cfg.pivot_c;
    let a = crank_end(design, cfg, theta);
    let b = joint_b(design, cfg, delta);
    let [rho_oa, rho_ab, rho_bc] = cfg.link_density;
    let rod = |rho: f64, from: Vec2, to: Vec2| {
        let len = from.distance(to);
        let m = rho * len;
        (m, (from + to) * 0.5, m * len * len / 12.0, (to - from).angle())
    };
    let tip = c + Vec2::from_angle(delta) * cfg.effector_tip_length;
    Some(Snapshot {
        parts: vec![
            rod(rho_oa, o, a),
            rod(rho_ab, a, b),
            rod(rho_bc, c, b),
            rod(rho_bc, c, tip),
            (cfg.payload_mass, tip, 0.0, delta),
        ],
        theta,
    })
}

/// Kinetic plus gravitational potential energy at time `t` of the forward
/// stroke, with velocities from central differences of positions.
pub fn brute_mechanical_energy(
    design: &DesignParams,
    cfg: &MechanismConfig,
    task: &MotionTask,
    t: f64,
    theta_near: f64,
) -> Option<f64> {
    let eps = 1e-6;
    let now = snapshot(design, cfg, task, t, theta_near)?;
    let before = snapshot(design, cfg, task, t - eps, now.theta)?;
    let after = snapshot(design, cfg, task, t + eps, now.theta)?;
    let mut energy = 0.0;
    for k in 0..now.parts.len() {
        let (m, p, i, _) = now.parts[k];
        let v = (after.parts[k].1 - before.parts[k].1) * (0.5 / eps);
        let w = wrap(after.parts[k].3 - before.parts[k].3) * (0.5 / eps);
        energy += 0.5 * m * v.norm_sq() + 0.5 * i * w * w - m * cfg.gravity.dot(p);
    }
    Some(energy)
}
