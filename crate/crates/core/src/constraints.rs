//! Quantified feasibility of a design.
//!
//! The static constraint measures assemblability at the two stroke ends. The
//! new bar lengths are laid out with the baseline design's relative bar angles,
//! which leaves the crank end O' detached from the pivot O. O' is then slid on
//! the straight line towards O while the effector stays pinned; the remaining
//! gap (positive), exact closure (zero) or overshoot past O (negative, capped)
//! is the constraint value.
//!
//! The dynamic constraint measures branch and circuit defects: the crank angle
//! range swept while the crank turns against its net direction of travel.

use crate::dynamics::{torque_profile, TorqueProfile};
use crate::error::{Error, Result};
use crate::geom::{signed_angle, Vec2};
use crate::kinematics::{kinematic_transform, validate_baseline, Trajectory};
use crate::model::{
    ConstraintBundle, DesignParams, EvaluationRecord, MechanismConfig, MotionTask, Pose, Posture, TrajectorySample,
};
use serde::{Deserialize, Serialize};

/// Start gap below which the slide direction O'->O is undefined.
pub const DEGENERATE_START: f64 = 1e-9;

/// Relative bar angles of the baseline design at one stroke end.
///
/// `beta` rotates the ray B→C onto B→A and `alpha` rotates A→B onto A→O.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineAngles {
    pub alpha: f64,
    pub beta: f64,
}

impl BaselineAngles {
    pub fn of(posture: &Posture, cfg: &MechanismConfig) -> Self {
        let (o, a, b, c) = (cfg.pivot_o(), posture.point_a, posture.point_b, cfg.pivot_c);
        Self { beta: signed_angle(c - b, a - b), alpha: signed_angle(b - a, o - a) }
    }
}

/// Signed baseline angles at one stroke end.
pub fn baseline_posture(cfg: &MechanismConfig, task: &MotionTask, pose: Pose) -> Result<BaselineAngles> {
    let table = validate_baseline(cfg, task)?;
    Ok(BaselineAngles::of(table.at_delta(task.delta(pose)), cfg))
}

/// Outcome of the gap-closing slide at one stroke end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticGapResult {
    pub o_prime_init: Vec2,
    pub o_prime_final: Vec2,
    /// Positive: residual gap. Zero: just closes. Negative: overshoot past O.
    pub value: f64,
    pub pose: Pose,
    /// O' started on O, so the slide ran radially outward from B instead.
    pub degenerate_start: bool,
}

/// Detached crank end for the new lengths laid out with the baseline angles.
pub fn detached_crank_end(design: &DesignParams, cfg: &MechanismConfig, delta: f64, angles: &BaselineAngles) -> Vec2 {
    let b = cfg.point_b(design.l_bc, delta);
    let a = b + (cfg.pivot_c - b).normalized().rotate(angles.beta) * design.l_ab;
    a + (b - a).normalized().rotate(angles.alpha) * design.l_oa
}

/// Projected length of O'O onto the initial gap direction.
///
/// Equals the initial gap when O' has not moved, zero when O' sits on O and is
/// negative once O' has passed O.
pub fn projected_gap(o: Vec2, o_prime_init: Vec2, o_prime: Vec2) -> f64 {
    let init = o - o_prime_init;
    init.dot(o - o_prime) / init.norm()
}

/// Arc length along `start + s * dir` at which the ray first leaves the closed
/// annulus around `center`. `dir` must be a unit vector.
fn annulus_exit(start: Vec2, dir: Vec2, center: Vec2, r_in: f64, r_out: f64) -> f64 {
    let w = start - center;
    let b = dir.dot(w);
    let ww = w.norm_sq();
    let out_disc = b * b - (ww - r_out * r_out);
    let mut exit = (-b + out_disc.max(0.0).sqrt()).max(0.0);
    if r_in > 0.0 {
        let in_disc = b * b - (ww - r_in * r_in);
        if in_disc > 0.0 {
            let root = in_disc.sqrt();
            let (enter, leave) = (-b - root, -b + root);
            if leave > 1e-12 * r_in {
                exit = exit.min(enter.max(0.0));
            }
        }
    }
    exit
}

/// Gap-closing slide for a precomputed set of baseline angles.
pub fn static_gap_with(
    design: &DesignParams,
    cfg: &MechanismConfig,
    delta: f64,
    pose: Pose,
    angles: &BaselineAngles,
) -> StaticGapResult {
    let o = cfg.pivot_o();
    let b = cfg.point_b(design.l_bc, delta);
    let r_in = (design.l_ab - design.l_oa).abs();
    let r_out = design.l_ab + design.l_oa;
    let cap = cfg.overshoot_cap;
    let o_init = detached_crank_end(design, cfg, delta, angles);
    let s_o = o.distance(o_init);

    if s_o < DEGENERATE_START {
        let dir = (o - b).normalized();
        let travel = (r_out - o.distance(b)).max(0.0).min(cap);
        return StaticGapResult {
            o_prime_init: o_init,
            o_prime_final: o + dir * travel,
            value: -travel,
            pose,
            degenerate_start: true,
        };
    }

    let dir = (o - o_init) * (1.0 / s_o);
    let exit = annulus_exit(o_init, dir, b, r_in, r_out);
    let (s_final, value) = if exit >= s_o + cap { (s_o + cap, -cap) } else { (exit, s_o - exit) };
    StaticGapResult {
        o_prime_init: o_init,
        o_prime_final: o_init + dir * s_final,
        value,
        pose,
        degenerate_start: false,
    }
}

/// Static constraint of `design` at one stroke end.
pub fn static_gap(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask, pose: Pose) -> Result<StaticGapResult> {
    let angles = baseline_posture(cfg, task, pose)?;
    Ok(static_gap_with(design, cfg, task.delta(pose), pose, &angles))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicConstraintResult {
    /// Crank angle range (rad) swept against the net direction of travel.
    pub value: f64,
    pub violating_indices: Vec<usize>,
    pub reference_sign: f64,
}

/// Speeds below this magnitude count as rest when looking for reversals.
const SPEED_DUST: f64 = 1e-12;

/// Defect measure of a single stroke from its crank angles and speeds.
pub fn dynamic_constraint_from(theta: &[f64], theta_dot: &[f64]) -> Result<DynamicConstraintResult> {
    if theta.is_empty() || theta.len() != theta_dot.len() {
        return Err(Error::EmptyTrajectory);
    }
    let net = theta[theta.len() - 1] - theta[0];
    let reference_sign = if net > 0.0 {
        1.0
    } else if net < 0.0 {
        -1.0
    } else {
        // No net travel: the first motion sets the direction.
        theta_dot.iter().find(|v| v.abs() > SPEED_DUST).map_or(1.0, |v| v.signum())
    };
    if theta_dot.iter().all(|&v| v >= 0.0) || theta_dot.iter().all(|&v| v <= 0.0) {
        return Ok(DynamicConstraintResult { value: 0.0, violating_indices: Vec::new(), reference_sign });
    }
    let violating_indices: Vec<usize> = theta_dot
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() > SPEED_DUST && v.signum() == -reference_sign)
        .map(|(k, _)| k)
        .collect();
    let (lo, hi) = violating_indices
        .iter()
        .map(|&k| theta[k])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let value = if violating_indices.is_empty() { 0.0 } else { hi - lo };
    Ok(DynamicConstraintResult { value, violating_indices, reference_sign })
}

/// Defect measure of a stroke ordered from `delta_e` to `delta_i`.
pub fn dynamic_constraint(trajectory: &[TrajectorySample]) -> Result<DynamicConstraintResult> {
    let theta: Vec<f64> = trajectory.iter().map(|s| s.theta).collect();
    let theta_dot: Vec<f64> = trajectory.iter().map(|s| s.theta_dot).collect();
    dynamic_constraint_from(&theta, &theta_dot)
}

/// Everything computed while evaluating one design.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub record: EvaluationRecord,
    pub static_i: StaticGapResult,
    pub static_e: StaticGapResult,
    pub trajectory: Option<Trajectory>,
    pub dynamic: Option<DynamicConstraintResult>,
    pub torque: Option<TorqueProfile>,
}

/// Evaluates designs against one validated mechanism and task.
#[derive(Clone, Debug)]
pub struct DesignEvaluator {
    cfg: MechanismConfig,
    task: MotionTask,
    angles_i: BaselineAngles,
    angles_e: BaselineAngles,
}

impl DesignEvaluator {
    /// Validates the baseline once and caches its angles at both stroke ends.
    pub fn new(cfg: &MechanismConfig, task: &MotionTask) -> Result<Self> {
        let table = validate_baseline(cfg, task)?;
        Ok(Self {
            cfg: cfg.clone(),
            task: task.clone(),
            angles_i: BaselineAngles::of(table.at_delta(task.delta_i), cfg),
            angles_e: BaselineAngles::of(table.at_delta(task.delta_e), cfg),
        })
    }

    pub fn mechanism(&self) -> &MechanismConfig {
        &self.cfg
    }

    pub fn task(&self) -> &MotionTask {
        &self.task
    }

    pub fn baseline_angles(&self, pose: Pose) -> BaselineAngles {
        match pose {
            Pose::Initial => self.angles_i,
            Pose::End => self.angles_e,
        }
    }

    pub fn static_gap(&self, design: &DesignParams, pose: Pose) -> StaticGapResult {
        static_gap_with(design, &self.cfg, self.task.delta(pose), pose, &self.baseline_angles(pose))
    }

    pub fn evaluate(&self, design: &DesignParams) -> EvaluationRecord {
        self.evaluate_full(design).record
    }

    /// Runs the pipeline: static gaps, then (if both close) the kinematic
    /// transformation and defect check, then (if defect free) the torque.
    pub fn evaluate_full(&self, design: &DesignParams) -> Evaluation {
        let static_i = self.static_gap(design, Pose::Initial);
        let static_e = self.static_gap(design, Pose::End);
        let mut eval = Evaluation {
            record: EvaluationRecord {
                design: *design,
                constraints: ConstraintBundle::new(static_i.value, static_e.value, None),
                objective: None,
                torque_profile_path: None,
            },
            static_i,
            static_e,
            trajectory: None,
            dynamic: None,
            torque: None,
        };
        if static_i.value > 0.0 || static_e.value > 0.0 {
            return eval;
        }
        let Ok(trajectory) = kinematic_transform(design, &self.cfg, &self.task) else {
            return eval;
        };
        let dynamic = dynamic_constraint(&trajectory.samples).expect("trajectory is non-empty");
        let constraints = ConstraintBundle::new(static_i.value, static_e.value, Some(dynamic.value));
        eval.record.constraints = constraints;
        if constraints.feasible {
            if let Ok(torque) = torque_profile(design, &self.cfg, &self.task, &trajectory) {
                eval.record.objective = Some(torque.t_rms);
                eval.torque = Some(torque);
            }
        }
        eval.trajectory = Some(trajectory);
        eval.dynamic = Some(dynamic);
        eval
    }
}

/// Evaluates one design. Infeasibility is reported in the record, not as an error.
pub fn evaluate_design(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask) -> Result<EvaluationRecord> {
    Ok(DesignEvaluator::new(cfg, task)?.evaluate(design))
}
