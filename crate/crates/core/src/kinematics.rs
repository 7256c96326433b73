//! Position analysis of the four-bar and the effector-to-crank transformation.
//!
//! The crank OA turns about the origin, the rocker CB about `pivot_c`, and the
//! coupler AB closes the loop. The end effector is rigidly attached to the
//! rocker, so prescribing its angle fixes B; A then lies on the intersection
//! of the crank circle and the coupler circle around B.

use crate::error::{Error, Result};
use crate::geom::{circle_intersections, wrap_angle, Vec2};
use crate::model::{Branch, DesignParams, MechanismConfig, MotionTask, Posture, TrajectorySample};
use crate::motion::motion_profile;
use serde::{Deserialize, Serialize};

/// Relative tolerance of the triangle-inequality tests in the circle solves.
pub const ASSEMBLY_TOL: f64 = 1e-12;

/// Crank angle from effector angle.
pub fn solve_ik(design: &DesignParams, cfg: &MechanismConfig, delta: f64, elbow: Branch) -> Result<Posture> {
    let b = cfg.point_b(design.l_bc, delta);
    let [plus, minus] = circle_intersections(cfg.pivot_o(), design.l_oa, b, design.l_ab, ASSEMBLY_TOL)
        .ok_or(Error::NotAssemblable)?;
    let a = match elbow {
        Branch::Plus => plus,
        Branch::Minus => minus,
    };
    let mut posture = Posture::assemble(cfg, delta, a, b);
    // Keep the requested tag at tangency, where both candidates coincide.
    posture.elbow = elbow;
    Ok(posture)
}

/// Both inverse solutions `[plus, minus]` at an effector angle.
pub fn ik_candidates(design: &DesignParams, cfg: &MechanismConfig, delta: f64) -> Result<[Posture; 2]> {
    Ok([solve_ik(design, cfg, delta, Branch::Plus)?, solve_ik(design, cfg, delta, Branch::Minus)?])
}

/// Effector angle from crank angle; `elbow` is the sign of `cross(C - A, B - A)`.
pub fn solve_fk(design: &DesignParams, cfg: &MechanismConfig, theta: f64, elbow: Branch) -> Result<Posture> {
    let a = cfg.pivot_o() + Vec2::from_angle(theta) * design.l_oa;
    let [plus, minus] = circle_intersections(a, design.l_ab, cfg.pivot_c, design.l_bc, ASSEMBLY_TOL)
        .ok_or(Error::NotAssemblable)?;
    let b = match elbow {
        Branch::Plus => plus,
        Branch::Minus => minus,
    };
    let delta = (b - cfg.pivot_c).angle() + cfg.effector_offset;
    let mut posture = Posture::assemble(cfg, delta, a, b);
    posture.theta = theta;
    Ok(posture)
}

/// Inverse solve that follows the intersection nearest to a previous crank joint.
pub fn continue_ik(design: &DesignParams, cfg: &MechanismConfig, delta: f64, prev_a: Vec2) -> Result<Posture> {
    let [plus, minus] = ik_candidates(design, cfg, delta)?;
    if plus.point_a.distance(prev_a) <= minus.point_a.distance(prev_a) {
        Ok(plus)
    } else {
        Ok(minus)
    }
}

/// First and second derivative of the crank angle with respect to the effector angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicCoefficients {
    pub dtheta_ddelta: f64,
    pub d2theta_ddelta2: f64,
    /// Coupler and rocker are collinear (transmission angle 0 or pi); the
    /// crank is momentarily at rest while the effector moves.
    pub transmission_singular: bool,
}

/// Closure derivatives at a posture, from differentiating `|A(theta) - B(delta)|^2 = l_ab^2`.
pub fn kinematic_coefficients(
    posture: &Posture,
    design: &DesignParams,
    cfg: &MechanismConfig,
) -> Result<KinematicCoefficients> {
    let a = posture.point_a - cfg.pivot_o();
    let b_rel = posture.point_b - cfg.pivot_c;
    let d = posture.point_a - posture.point_b;
    let a_theta = a.perp();
    let b_delta = b_rel.perp();

    let den = d.dot(a_theta);
    if den.abs() < 1e-12 * design.l_oa * design.l_ab {
        return Err(Error::SingularPosture);
    }
    let num = d.dot(b_delta);
    let g = num / den;

    // Second derivative of the closure: D'.D' + D.D'' = 0 with
    // D' = A_theta g - B_delta, A_thetatheta = -A, B_deltadelta = -(B - C).
    let d_prime = a_theta * g - b_delta;
    let g_prime = -(d_prime.norm_sq() - g * g * d.dot(a) + d.dot(b_rel)) / den;

    Ok(KinematicCoefficients {
        dtheta_ddelta: g,
        d2theta_ddelta2: g_prime,
        transmission_singular: num.abs() < 1e-12 * design.l_ab * design.l_bc,
    })
}

/// d²θ/dδ² by Richardson-extrapolated central differences of the first
/// coefficient, holding the inverse branch fixed.
pub fn second_coefficient_fd(
    posture: &Posture,
    design: &DesignParams,
    cfg: &MechanismConfig,
    h: f64,
) -> Result<f64> {
    let g = |delta: f64| -> Result<f64> {
        let p = solve_ik(design, cfg, delta, posture.elbow)?;
        Ok(kinematic_coefficients(&p, design, cfg)?.dtheta_ddelta)
    };
    let central = |step: f64| -> Result<f64> {
        Ok((g(posture.delta + step)? - g(posture.delta - step)?) / (2.0 * step))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Baseline postures over the whole stroke, ordered by increasing effector angle.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineTable {
    pub postures: Vec<Posture>,
}

impl BaselineTable {
    pub fn at_min(&self) -> &Posture {
        &self.postures[0]
    }

    pub fn at_max(&self) -> &Posture {
        self.postures.last().expect("table is non-empty")
    }

    /// Posture at one end of the stroke.
    pub fn at_delta(&self, delta: f64) -> &Posture {
        if (delta - self.at_min().delta).abs() <= (delta - self.at_max().delta).abs() {
            self.at_min()
        } else {
            self.at_max()
        }
    }
}

/// Evenly spaced effector angles over `[lo, hi]`, hitting both ends and the
/// midpoint exactly.
fn delta_grid(task: &MotionTask) -> Vec<f64> {
    let lo = task.delta_i.min(task.delta_e);
    let hi = task.delta_i.max(task.delta_e);
    let n = task.n_samples;
    let mid = n / 2;
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else if k == mid {
                task.delta_mid()
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Solves the grid outward from its middle entry by branch continuation.
fn continue_from_mid<T>(
    design: &DesignParams,
    cfg: &MechanismConfig,
    deltas: &[f64],
    elbow: Branch,
    on_seed_failure: impl FnOnce() -> Error,
    on_failure: impl Fn(f64) -> Error,
    mut wrap: impl FnMut(usize, Posture) -> T,
) -> Result<Vec<T>> {
    let n = deltas.len();
    let mid = n / 2;
    let seed = solve_ik(design, cfg, deltas[mid], elbow).map_err(|_| on_seed_failure())?;
    let mut postures = vec![seed; n];
    for range in [(0..mid).rev().collect::<Vec<_>>(), (mid + 1..n).collect()] {
        let mut prev = seed;
        for k in range {
            let mut p = continue_ik(design, cfg, deltas[k], prev.point_a).map_err(|_| on_failure(deltas[k]))?;
            p.theta = prev.theta + wrap_angle(p.theta - prev.theta);
            postures[k] = p;
            prev = p;
        }
    }
    Ok(postures.into_iter().enumerate().map(|(k, p)| wrap(k, p)).collect())
}

/// Checks that the baseline design assembles over the whole stroke on the
/// configured branch and that its crank angle is strictly monotonic.
pub fn validate_baseline(cfg: &MechanismConfig, task: &MotionTask) -> Result<BaselineTable> {
    cfg.validate()?;
    task.validate()?;
    let deltas = delta_grid(task);
    let postures = continue_from_mid(
        &cfg.baseline,
        cfg,
        &deltas,
        cfg.branch,
        || Error::BaselineInfeasible { delta: task.delta_mid() },
        |delta| Error::BaselineInfeasible { delta },
        |_, p| p,
    )?;
    let diffs: Vec<f64> = postures.windows(2).map(|w| w[1].theta - w[0].theta).collect();
    if !(diffs.iter().all(|&d| d > 0.0) || diffs.iter().all(|&d| d < 0.0)) {
        return Err(Error::BaselineDefective);
    }
    Ok(BaselineTable { postures })
}

/// The effector stroke mapped to the crank.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Forward stroke samples, ordered from `delta_e` to `delta_i`.
    pub samples: Vec<TrajectorySample>,
    pub postures: Vec<Posture>,
    /// `None` at samples where the effector is at rest on a dead point, where
    /// the coefficients are unbounded but not needed.
    pub coefficients: Vec<Option<KinematicCoefficients>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta).collect()
    }

    pub fn theta_dots(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta_dot).collect()
    }
}

/// Crank motion `theta(t)` with derivatives from the chain rule.
pub(crate) fn chain_rule(
    coeff: Option<&KinematicCoefficients>,
    delta_dot: f64,
    delta_ddot: f64,
) -> (f64, f64) {
    match coeff {
        Some(k) => (
            k.dtheta_ddelta * delta_dot,
            k.d2theta_ddelta2 * delta_dot * delta_dot + k.dtheta_ddelta * delta_ddot,
        ),
        None => (0.0, 0.0),
    }
}

/// Maps the prescribed effector stroke onto the crank.
///
/// The linkage is seeded at the stroke midpoint on the configured branch and
/// continued outward to both ends, which lets designs whose crank and coupler
/// fold into a line at a stroke end still be traced.
pub fn kinematic_transform(design: &DesignParams, cfg: &MechanismConfig, task: &MotionTask) -> Result<Trajectory> {
    let profile = motion_profile(task);
    let mid = profile.len() / 2;
    let deltas: Vec<f64> = profile
        .iter()
        .enumerate()
        .map(|(k, p)| if k == mid { task.delta_mid() } else { p.forward(task).0 })
        .collect();
    let postures = continue_from_mid(
        design,
        cfg,
        &deltas,
        cfg.branch,
        || Error::SeedUnsolvable,
        |delta| Error::TransformUnsolvable { delta },
        |_, p| p,
    )?;

    let mut samples = Vec::with_capacity(postures.len());
    let mut coefficients = Vec::with_capacity(postures.len());
    for (point, posture) in profile.iter().zip(&postures) {
        let (_, delta_dot, delta_ddot) = point.forward(task);
        let coeff = match kinematic_coefficients(posture, design, cfg) {
            Ok(k) => Some(k),
            Err(Error::SingularPosture) if delta_dot == 0.0 && delta_ddot == 0.0 => None,
            Err(Error::SingularPosture) => return Err(Error::TransformUnsolvable { delta: posture.delta }),
            Err(e) => return Err(e),
        };
        let (theta_dot, theta_ddot) = chain_rule(coeff.as_ref(), delta_dot, delta_ddot);
        samples.push(TrajectorySample {
            t: point.t,
            delta: posture.delta,
            delta_dot,
            delta_ddot,
            theta: posture.theta,
            theta_dot,
            theta_ddot,
        });
        coefficients.push(coeff);
    }
    Ok(Trajectory { samples, postures, coefficients })
}
