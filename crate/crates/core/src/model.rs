//! Domain types shared by every stage of the design evaluation.
//!
//! Units are SI throughout: lengths in meters, angles in radians, time in
//! seconds, torque in N·m. The fixed crank pivot `O` sits at the origin.

use crate::error::{Error, Result};
use crate::geom::{unsigned_angle, Vec2};
use serde::{Deserialize, Serialize};

/// The three optimization variables: crank |OA|, coupler |AB| and rocker |BC|.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub l_oa: f64,
    pub l_ab: f64,
    pub l_bc: f64,
}

impl DesignParams {
    pub fn new(l_oa: f64, l_ab: f64, l_bc: f64) -> Result<Self> {
        let d = Self { l_oa, l_ab, l_bc };
        d.validate("")?;
        Ok(d)
    }

    pub(crate) fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [("l_oa", self.l_oa), ("l_ab", self.l_ab), ("l_bc", self.l_bc)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("{prefix}{name}"),
                    format!("length must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l_oa, self.l_ab, self.l_bc]
    }

    pub fn from_array([l_oa, l_ab, l_bc]: [f64; 3]) -> Self {
        Self { l_oa, l_ab, l_bc }
    }

    /// Scales every length by `k`.
    pub fn scaled(self, k: f64) -> Self {
        Self { l_oa: self.l_oa * k, l_ab: self.l_ab * k, l_bc: self.l_bc * k }
    }
}

/// Assembly branch of a circle-intersection solve.
///
/// For the inverse solve (effector angle given) `Plus` means
/// `cross(B - O, A - O) > 0`; for the forward solve (crank angle given) it
/// means `cross(C - A, B - A) > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[serde(alias = "Plus", alias = "+")]
    Plus,
    #[serde(alias = "Minus", alias = "-")]
    Minus,
}

impl Branch {
    pub fn from_sign(s: f64) -> Self {
        if s >= 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Ground geometry, mass model, loads and baseline design of the mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    /// Rocker pivot C. The crank pivot O is the origin.
    pub pivot_c: Vec2,
    /// Rigid angle between the rocker direction C→B and the end-effector beam.
    pub effector_offset: f64,
    /// Linear density of bars OA, AB and BC (kg/m). The effector beam uses the
    /// rocker density.
    pub link_density: [f64; 3],
    pub payload_mass: f64,
    /// Distance from C to the payload along the effector beam.
    pub effector_tip_length: f64,
    /// Constant external force at the effector tip (N).
    pub tip_force: Vec2,
    pub gravity: Vec2,
    pub baseline: DesignParams,
    pub branch: Branch,
    /// How far the detached crank end may slide past O when measuring the
    /// static constraint.
    pub overshoot_cap: f64,
}

pub const DEFAULT_OVERSHOOT_CAP: f64 = 0.020;

impl MechanismConfig {
    pub fn pivot_o(&self) -> Vec2 {
        Vec2::ZERO
    }

    /// Rocker direction angle (C→B) for an effector angle.
    pub fn rocker_angle(&self, delta: f64) -> f64 {
        delta - self.effector_offset
    }

    /// Joint B for a given effector angle and rocker length.
    pub fn point_b(&self, l_bc: f64, delta: f64) -> Vec2 {
        self.pivot_c + Vec2::from_angle(self.rocker_angle(delta)) * l_bc
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pivot_c.is_finite() || self.pivot_c.norm() <= 0.0 {
            return Err(Error::validation("mechanism.pivot_c", "must be finite and distinct from O"));
        }
        if !self.effector_offset.is_finite() {
            return Err(Error::validation("mechanism.effector_offset", "must be finite"));
        }
        for (k, rho) in self.link_density.iter().enumerate() {
            if !(rho.is_finite() && *rho >= 0.0) {
                return Err(Error::validation(
                    format!("mechanism.link_density[{k}]"),
                    "must be finite and non-negative",
                ));
            }
        }
        if !(self.payload_mass.is_finite() && self.payload_mass >= 0.0) {
            return Err(Error::validation("mechanism.payload_mass", "must be finite and non-negative"));
        }
        if !(self.effector_tip_length.is_finite() && self.effector_tip_length >= 0.0) {
            return Err(Error::validation(
                "mechanism.effector_tip_length",
                "must be finite and non-negative",
            ));
        }
        if !self.tip_force.is_finite() {
            return Err(Error::validation("mechanism.tip_force", "must be finite"));
        }
        if !self.gravity.is_finite() {
            return Err(Error::validation("mechanism.gravity", "must be finite"));
        }
        self.baseline.validate("mechanism.baseline.")?;
        if !(self.overshoot_cap.is_finite() && self.overshoot_cap > 0.0) {
            return Err(Error::validation("mechanism.overshoot_cap", "must be positive"));
        }
        Ok(())
    }
}

/// The prescribed end-effector stroke.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionTask {
    /// Maximal-compression angle, end of the forward stroke.
    pub delta_i: f64,
    /// Touch angle, start of the forward stroke.
    pub delta_e: f64,
    pub t_move: f64,
    pub t_dwell: f64,
    pub n_samples: usize,
}

impl MotionTask {
    pub fn delta_mid(&self) -> f64 {
        0.5 * (self.delta_i + self.delta_e)
    }

    pub fn delta(&self, pose: Pose) -> f64 {
        match pose {
            Pose::Initial => self.delta_i,
            Pose::End => self.delta_e,
        }
    }

    pub fn t_cycle(&self) -> f64 {
        2.0 * (self.t_move + self.t_dwell)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_i.is_finite() {
            return Err(Error::validation("task.delta_i", "must be finite"));
        }
        if !self.delta_e.is_finite() {
            return Err(Error::validation("task.delta_e", "must be finite"));
        }
        if self.delta_i == self.delta_e {
            return Err(Error::validation("task.delta_e", "stroke is degenerate (delta_i = delta_e)"));
        }
        if !(self.t_move.is_finite() && self.t_move > 0.0) {
            return Err(Error::validation("task.t_move", "must be positive"));
        }
        if !(self.t_dwell.is_finite() && self.t_dwell >= 0.0) {
            return Err(Error::validation("task.t_dwell", "must be non-negative"));
        }
        if self.n_samples < 51 || self.n_samples % 2 == 0 {
            return Err(Error::validation(
                "task.n_samples",
                format!("must be odd and at least 51, got {}", self.n_samples),
            ));
        }
        Ok(())
    }
}

/// One of the two stroke extremes at which assemblability is checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pose {
    /// delta_i, maximal compression.
    #[serde(rename = "i")]
    Initial,
    /// delta_e, touching.
    #[serde(rename = "e")]
    End,
}

impl std::str::FromStr for Pose {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" | "delta_i" => Ok(Pose::Initial),
            "e" | "delta_e" => Ok(Pose::End),
            other => Err(Error::validation("pose", format!("expected `i` or `e`, got `{other}`"))),
        }
    }
}

/// A fully assembled configuration of the linkage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posture {
    /// Crank direction O→A.
    pub theta: f64,
    /// Effector angle.
    pub delta: f64,
    /// Rocker direction C→B.
    pub rocker_angle: f64,
    pub point_a: Vec2,
    pub point_b: Vec2,
    /// Interior angle at A between rays A→O and A→B.
    pub alpha: f64,
    /// Transmission angle at B between rays B→A and B→C.
    pub beta: f64,
    /// Inverse-solve branch, `sign(cross(B - O, A - O))`.
    pub elbow: Branch,
}

impl Posture {
    pub(crate) fn assemble(cfg: &MechanismConfig, delta: f64, a: Vec2, b: Vec2) -> Self {
        let o = cfg.pivot_o();
        let c = cfg.pivot_c;
        Posture {
            theta: (a - o).angle(),
            delta,
            rocker_angle: cfg.rocker_angle(delta),
            point_a: a,
            point_b: b,
            alpha: unsigned_angle(o - a, b - a),
            beta: unsigned_angle(a - b, c - b),
            elbow: Branch::from_sign((b - o).cross(a - o)),
        }
    }

    /// Forward-solve branch of this posture, `sign(cross(C - A, B - A))`.
    pub fn coupler_branch(&self, cfg: &MechanismConfig) -> Branch {
        Branch::from_sign((cfg.pivot_c - self.point_a).cross(self.point_b - self.point_a))
    }

    /// Largest relative bar-length residual of the posture.
    pub fn length_residual(&self, design: &DesignParams, cfg: &MechanismConfig) -> f64 {
        let r_oa = ((self.point_a - cfg.pivot_o()).norm() - design.l_oa).abs() / design.l_oa;
        let r_ab = ((self.point_a - self.point_b).norm() - design.l_ab).abs() / design.l_ab;
        let r_bc = ((self.point_b - cfg.pivot_c).norm() - design.l_bc).abs() / design.l_bc;
        r_oa.max(r_ab).max(r_bc)
    }
}

/// One time-stamped state of the kinematic transformation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub delta: f64,
    pub delta_dot: f64,
    pub delta_ddot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

/// Quantified constraint values of one design.
///
/// `c_dyn` is `None` when the design could not be moved through the stroke
/// (statically infeasible), which is different from a defect-free stroke.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintBundle {
    pub c_static_i: f64,
    pub c_static_e: f64,
    pub c_dyn: Option<f64>,
    pub feasible: bool,
}

/// Tolerance on the dynamic constraint below which a stroke is defect free.
pub const DYNAMIC_TOLERANCE: f64 = 1e-9;

impl ConstraintBundle {
    pub fn new(c_static_i: f64, c_static_e: f64, c_dyn: Option<f64>) -> Self {
        let feasible = c_static_i <= 0.0
            && c_static_e <= 0.0
            && matches!(c_dyn, Some(v) if v <= DYNAMIC_TOLERANCE);
        Self { c_static_i, c_static_e, c_dyn, feasible }
    }
}

/// Result of evaluating one design; the unit of surrogate training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub design: DesignParams,
    #[serde(flatten)]
    pub constraints: ConstraintBundle,
    /// RMS motor torque over the duty cycle (N·m).
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_profile_path: Option<String>,
}
