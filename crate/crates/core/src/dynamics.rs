//! Inverse dynamics of the single-degree-of-freedom linkage.
//!
//! With the crank angle as generalized coordinate the kinetic energy is
//! `KE = I_eq(theta) theta_dot^2 / 2`, and Lagrange's equation gives the motor torque
//!
//! ```text
//! T_m = I_eq theta_ddot + I_eq'(theta) theta_dot^2 / 2 + dV/dtheta - Q_ext
//! ```
//!
//! where `Q_ext` is the generalized force of the tip load.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kinematics::{chain_rule, solve_fk, Trajectory};
use crate::model::{DesignParams, MechanismConfig, MotionTask, Posture};
use crate::motion::motion_profile;
use serde::{Deserialize, Serialize};

/// Step of the central difference used for `I_eq'`.
pub const INERTIA_FD_STEP: f64 = 1e-5;

/// Mass properties of one rigid link in its own frame.
///
/// The frame origin is the link's ground pivot (crank: O, rocker: C) or its
/// first joint (coupler: A), with the x-axis along the bar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkInertia {
    pub mass: f64,
    pub com: Vec2,
    /// Moment of inertia about the center of mass.
    pub i_com: f64,
}

impl LinkInertia {
    /// Uniform slender rod lying on the local x-axis from the origin.
    pub fn rod(density: f64, length: f64) -> Self {
        let mass = density * length;
        Self { mass, com: Vec2::new(0.5 * length, 0.0), i_com: mass * length * length / 12.0 }
    }

    pub fn point(mass: f64, at: Vec2) -> Self {
        Self { mass, com: at, i_com: 0.0 }
    }

    /// The same body rotated by `angle` about the frame origin.
    pub fn rotated(self, angle: f64) -> Self {
        Self { com: self.com.rotate(angle), ..self }
    }

    /// Rigid union of several bodies sharing one frame.
    pub fn union(parts: &[LinkInertia]) -> Self {
        let mass: f64 = parts.iter().map(|p| p.mass).sum();
        if mass == 0.0 {
            return Self::default();
        }
        let com = parts.iter().fold(Vec2::ZERO, |acc, p| acc + p.com * p.mass) * (1.0 / mass);
        let i_com = parts.iter().map(|p| p.i_com + p.mass * (p.com - com).norm_sq()).sum();
        Self { mass, com, i_com }
    }

    /// Moment of inertia about the frame origin.
    pub fn i_origin(&self) -> f64 {
        self.i_com + self.mass * self.com.norm_sq()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassModel {
    pub crank: LinkInertia,
    pub coupler: LinkInertia,
    /// Bar BC, the effector beam and the payload as one body.
    pub rocker: LinkInertia,
}

pub fn mass_model(design: &DesignParams, cfg: &MechanismConfig) -> MassModel {
    let [rho_oa, rho_ab, rho_bc] = cfg.link_density;
    let beam = LinkInertia::rod(rho_bc, cfg.effector_tip_length).rotated(cfg.effector_offset);
    let payload =
        LinkInertia::point(cfg.payload_mass, Vec2::from_angle(cfg.effector_offset) * cfg.effector_tip_length);
    MassModel {
        crank: LinkInertia::rod(rho_oa, design.l_oa),
        coupler: LinkInertia::rod(rho_ab, design.l_ab),
        rocker: LinkInertia::union(&[LinkInertia::rod(rho_bc, design.l_bc), beam, payload]),
    }
}

/// Link velocities per unit crank speed.
#[derive(Clone, Copy, Debug)]
struct UnitVelocities {
    v_crank: Vec2,
    v_coupler: Vec2,
    w_coupler: f64,
    v_rocker: Vec2,
    w_rocker: f64,
    v_tip: Vec2,
}

/// Evaluates motor torque and mechanical energy for one design.
#[derive(Clone, Debug)]
pub struct TorqueModel<'a> {
    design: DesignParams,
    cfg: &'a MechanismConfig,
    mass: MassModel,
}

impl<'a> TorqueModel<'a> {
    pub fn new(design: &DesignParams, cfg: &'a MechanismConfig) -> Self {
        Self { design: *design, cfg, mass: mass_model(design, cfg) }
    }

    pub fn mass(&self) -> &MassModel {
        &self.mass
    }

    fn com_positions(&self, p: &Posture) -> [Vec2; 3] {
        let cfg = self.cfg;
        let coupler_angle = (p.point_b - p.point_a).angle();
        [
            cfg.pivot_o() + self.mass.crank.com.rotate(p.theta),
            p.point_a + self.mass.coupler.com.rotate(coupler_angle),
            cfg.pivot_c + self.mass.rocker.com.rotate(p.rocker_angle),
        ]
    }

    fn unit_velocities(&self, p: &Posture) -> Result<UnitVelocities> {
        let cfg = self.cfg;
        let a = p.point_a - cfg.pivot_o();
        let b_rel = p.point_b - cfg.pivot_c;
        let d = p.point_a - p.point_b;
        let num = d.dot(b_rel.perp());
        if num.abs() < 1e-12 * self.design.l_ab * self.design.l_bc {
            return Err(Error::SingularState { t: f64::NAN });
        }
        let w_rocker = d.dot(a.perp()) / num;
        let v_a = a.perp();
        let v_b = b_rel.perp() * w_rocker;
        let ab = p.point_b - p.point_a;
        let w_coupler = ab.cross(v_b - v_a) / ab.norm_sq();
        let coupler_angle = ab.angle();
        let tip = Vec2::from_angle(p.delta) * cfg.effector_tip_length;
        Ok(UnitVelocities {
            v_crank: self.mass.crank.com.rotate(p.theta).perp(),
            v_coupler: v_a + self.mass.coupler.com.rotate(coupler_angle).perp() * w_coupler,
            w_coupler,
            v_rocker: self.mass.rocker.com.rotate(p.rocker_angle).perp() * w_rocker,
            w_rocker,
            v_tip: tip.perp() * w_rocker,
        })
    }

    fn inertia_from(&self, v: &UnitVelocities) -> f64 {
        let m = &self.mass;
        m.crank.i_origin()
            + m.coupler.mass * v.v_coupler.norm_sq()
            + m.coupler.i_com * v.w_coupler * v.w_coupler
            + m.rocker.i_origin() * v.w_rocker * v.w_rocker
    }

    /// Reduced inertia `I_eq(theta)` seen by the motor.
    pub fn reduced_inertia(&self, p: &Posture) -> Result<f64> {
        Ok(self.inertia_from(&self.unit_velocities(p)?))
    }

    /// `dI_eq/dtheta` by central differences along the crank, branch held.
    pub fn reduced_inertia_slope(&self, p: &Posture) -> Result<f64> {
        let branch = p.coupler_branch(self.cfg);
        let eval = |theta: f64| -> Result<f64> {
            let q = solve_fk(&self.design, self.cfg, theta, branch).map_err(|_| Error::SingularState { t: f64::NAN })?;
            self.reduced_inertia(&q)
        };
        let h = INERTIA_FD_STEP;
        Ok((eval(p.theta + h)? - eval(p.theta - h)?) / (2.0 * h))
    }

    /// Potential energy of gravity, `V = -sum m_k g . r_k`.
    pub fn potential(&self, p: &Posture) -> f64 {
        let coms = self.com_positions(p);
        let masses = [self.mass.crank.mass, self.mass.coupler.mass, self.mass.rocker.mass];
        -coms.iter().zip(masses).map(|(r, m)| m * self.cfg.gravity.dot(*r)).sum::<f64>()
    }

    pub fn kinetic(&self, p: &Posture, theta_dot: f64) -> Result<f64> {
        Ok(0.5 * self.reduced_inertia(p)? * theta_dot * theta_dot)
    }

    /// `dV/dtheta - Q_ext`: the torque needed to hold the posture at rest.
    pub fn holding_torque(&self, p: &Posture) -> Result<f64> {
        let v = self.unit_velocities(p)?;
        Ok(self.static_part(&v))
    }

    fn static_part(&self, v: &UnitVelocities) -> f64 {
        let m = &self.mass;
        let g = self.cfg.gravity;
        let dv = -(m.crank.mass * g.dot(v.v_crank) + m.coupler.mass * g.dot(v.v_coupler) + m.rocker.mass * g.dot(v.v_rocker));
        dv - self.cfg.tip_force.dot(v.v_tip)
    }

    /// Motor torque at a posture moving with the given crank speed and acceleration.
    pub fn torque(&self, p: &Posture, theta_dot: f64, theta_ddot: f64) -> Result<f64> {
        let v = self.unit_velocities(p)?;
        let mut torque = self.static_part(&v);
        if theta_ddot != 0.0 {
            torque += self.inertia_from(&v) * theta_ddot;
        }
        if theta_dot != 0.0 {
            torque += 0.5 * self.reduced_inertia_slope(p)? * theta_dot * theta_dot;
        }
        Ok(torque)
    }
}

/// Motor torque at one state of the linkage.
pub fn torque_at_state(
    design: &DesignParams,
    cfg: &MechanismConfig,
    posture: &Posture,
    theta_dot: f64,
    theta_ddot: f64,
) -> Result<f64> {
    TorqueModel::new(design, cfg).torque(posture, theta_dot, theta_ddot)
}

/// Motor torque over one duty cycle and its RMS value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorqueProfile {
    /// `(t, torque)` over forward stroke, dwell, return stroke and dwell.
    pub samples: Vec<(f64, f64)>,
    pub t_rms: f64,
    pub t_cycle: f64,
}

/// RMS of a piecewise-linear signal by the trapezoidal rule. Repeated time
/// stamps encode jumps.
pub fn rms_from_samples(samples: &[(f64, f64)], t_cycle: f64) -> f64 {
    let integral: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 * w[0].1 + w[1].1 * w[1].1))
        .sum();
    (integral / t_cycle).max(0.0).sqrt()
}

/// Torque of both strokes with a holding torque during each dwell.
///
/// The return stroke is recomputed from the time-reversed effector profile
/// over the same postures.
pub fn torque_profile(
    design: &DesignParams,
    cfg: &MechanismConfig,
    task: &MotionTask,
    trajectory: &Trajectory,
) -> Result<TorqueProfile> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let model = TorqueModel::new(design, cfg);
    let n = trajectory.len();
    let with_t = |t: f64| move |e: Error| match e {
        Error::SingularState { .. } => Error::SingularState { t },
        other => other,
    };

    let mut samples = Vec::with_capacity(2 * n + 2);
    for (s, p) in trajectory.samples.iter().zip(&trajectory.postures) {
        let torque = model.torque(p, s.theta_dot, s.theta_ddot).map_err(with_t(s.t))?;
        samples.push((s.t, torque));
    }
    let hold_i = samples[n - 1].1;
    let t_return = task.t_move + task.t_dwell;
    if task.t_dwell > 0.0 {
        samples.push((t_return, hold_i));
    }

    let profile = motion_profile(task);
    for (k, point) in profile.iter().enumerate() {
        let mirror = n - 1 - k;
        let (_, delta_dot, delta_ddot) = point.backward(task);
        let (theta_dot, theta_ddot) = chain_rule(trajectory.coefficients[mirror].as_ref(), delta_dot, delta_ddot);
        let t = t_return + point.t;
        let torque = model.torque(&trajectory.postures[mirror], theta_dot, theta_ddot).map_err(with_t(t))?;
        if k == 0 && task.t_dwell == 0.0 {
            // Same instant as the end of the forward stroke.
            continue;
        }
        samples.push((t, torque));
    }
    let hold_e = samples.last().expect("non-empty").1;
    let t_cycle = task.t_cycle();
    if task.t_dwell > 0.0 {
        samples.push((t_cycle, hold_e));
    }
    Ok(TorqueProfile { t_rms: rms_from_samples(&samples, t_cycle), samples, t_cycle })
}
