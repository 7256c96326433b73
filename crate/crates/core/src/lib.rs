//! Dimensional synthesis of a motor-driven planar four-bar mechanism.
//!
//! A candidate design (crank, coupler and rocker lengths) is evaluated by
//! mapping a prescribed end-effector stroke onto the crank, checking that the
//! linkage assembles at both stroke ends and moves without branch or circuit
//! defects, and computing the RMS motor torque over the duty cycle. A
//! constrained Bayesian optimizer searches the design box for the feasible
//! design with the lowest RMS torque, learning a Gaussian-process surrogate
//! for the objective and one for each quantified constraint.

pub mod config;
pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod gp;
pub mod io;
pub mod kinematics;
pub mod model;
pub mod motion;
pub mod optimizer;
pub mod oracle;

pub use config::{load_config, load_problem, ProblemConfig};
pub use constraints::{evaluate_design, DesignEvaluator};
pub use error::{Error, Result};
pub use geom::Vec2;
pub use model::{
    Branch, ConstraintBundle, DesignParams, EvaluationRecord, MechanismConfig, MotionTask, Pose, Posture,
    TrajectorySample,
};
