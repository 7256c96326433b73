//! JSON configuration files.
//!
//! A file has three top-level keys, `mechanism`, `task` and `optimizer`. All
//! quantities are SI. Angle fields (`effector_offset`, `delta_i`, `delta_e`)
//! are radians when given as a bare number; `{"value": 90, "units": "deg"}`
//! gives them in degrees instead.
//!
//! ```json
//! {
//!   "mechanism": {
//!     "pivot_c": [0.30, 0.0],
//!     "effector_offset": 0.0,
//!     "link_density": [2.0, 2.0, 2.0],
//!     "payload_mass": 0.5,
//!     "effector_tip_length": 0.25,
//!     "gravity": [0.0, -9.81],
//!     "baseline": { "l_oa": 0.10, "l_ab": 0.25, "l_bc": 0.15 },
//!     "branch": "plus"
//!   },
//!   "task": {
//!     "delta_i": { "value": 150, "units": "deg" },
//!     "delta_e": { "value": 90, "units": "deg" },
//!     "t_move": 0.5,
//!     "n_samples": 201
//!   },
//!   "optimizer": {
//!     "bounds": { "l_oa": [0.03, 0.14], "l_ab": [0.15, 0.34], "l_bc": [0.08, 0.25] },
//!     "seed": 7
//!   }
//! }
//! ```
//!
//! Optional fields and their defaults: `tip_force` `[0, 0]`, `gravity`
//! `[0, -9.81]`, `branch` `"plus"`, `overshoot_cap` `0.020`, `t_dwell` `0`,
//! `n_samples` `201`, `n_init` `12`, `n_max` `60`, `n_acq_starts` `32`,
//! `n_acq_samples` `4096`, `seed` `0`.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::model::{Branch, DesignParams, MechanismConfig, MotionTask, DEFAULT_OVERSHOOT_CAP};
use crate::optimizer::{Bounds, OptimizerConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A complete problem definition as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub mechanism: MechanismConfig,
    pub task: MotionTask,
    pub optimizer: OptimizerConfig,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleField {
    Radians(f64),
    Tagged { value: f64, #[serde(default)] units: Option<String> },
}

impl AngleField {
    fn radians(&self, field: &str) -> Result<f64> {
        match self {
            AngleField::Radians(v) => Ok(*v),
            AngleField::Tagged { value, units } => match units.as_deref() {
                None | Some("rad") => Ok(*value),
                Some("deg") => Ok(value.to_radians()),
                Some(u) => Err(Error::validation(field, format!("unknown angle units `{u}`"))),
            },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    pivot_c: [f64; 2],
    #[serde(default)]
    effector_offset: Option<AngleField>,
    link_density: [f64; 3],
    payload_mass: f64,
    effector_tip_length: f64,
    #[serde(default)]
    tip_force: Option<[f64; 2]>,
    #[serde(default)]
    gravity: Option<[f64; 2]>,
    baseline: DesignParams,
    #[serde(default)]
    branch: Option<Branch>,
    #[serde(default)]
    overshoot_cap: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    delta_i: AngleField,
    delta_e: AngleField,
    t_move: f64,
    #[serde(default)]
    t_dwell: Option<f64>,
    #[serde(default)]
    n_samples: Option<usize>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    l_oa: [f64; 2],
    l_ab: [f64; 2],
    l_bc: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    bounds: RawBounds,
    #[serde(default)]
    n_init: Option<usize>,
    #[serde(default)]
    n_max: Option<usize>,
    #[serde(default)]
    n_acq_starts: Option<usize>,
    #[serde(default)]
    n_acq_samples: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mechanism: RawMechanism,
    task: RawTask,
    optimizer: RawOptimizer,
}

impl RawConfig {
    fn into_config(self) -> Result<ProblemConfig> {
        let m = self.mechanism;
        let mechanism = MechanismConfig {
            pivot_c: m.pivot_c.into(),
            effector_offset: match &m.effector_offset {
                Some(a) => a.radians("mechanism.effector_offset")?,
                None => 0.0,
            },
            link_density: m.link_density,
            payload_mass: m.payload_mass,
            effector_tip_length: m.effector_tip_length,
            tip_force: m.tip_force.map(Vec2::from).unwrap_or(Vec2::ZERO),
            gravity: m.gravity.map(Vec2::from).unwrap_or(Vec2::new(0.0, -9.81)),
            baseline: m.baseline,
            branch: m.branch.unwrap_or(Branch::Plus),
            overshoot_cap: m.overshoot_cap.unwrap_or(DEFAULT_OVERSHOOT_CAP),
        };
        let t = self.task;
        let task = MotionTask {
            delta_i: t.delta_i.radians("task.delta_i")?,
            delta_e: t.delta_e.radians("task.delta_e")?,
            t_move: t.t_move,
            t_dwell: t.t_dwell.unwrap_or(0.0),
            n_samples: t.n_samples.unwrap_or(201),
        };
        let o = self.optimizer;
        let defaults = OptimizerConfig::default_with_bounds(Bounds::new(vec![0.0; 3], vec![1.0; 3]));
        let optimizer = OptimizerConfig {
            bounds: Bounds::new(
                vec![o.bounds.l_oa[0], o.bounds.l_ab[0], o.bounds.l_bc[0]],
                vec![o.bounds.l_oa[1], o.bounds.l_ab[1], o.bounds.l_bc[1]],
            ),
            n_init: o.n_init.unwrap_or(defaults.n_init),
            n_max: o.n_max.unwrap_or(defaults.n_max),
            n_acq_starts: o.n_acq_starts.unwrap_or(defaults.n_acq_starts),
            n_acq_samples: o.n_acq_samples.unwrap_or(defaults.n_acq_samples),
            seed: o.seed.unwrap_or(defaults.seed),
        };
        let cfg = ProblemConfig { mechanism, task, optimizer };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        self.mechanism.validate()?;
        self.task.validate()?;
        self.optimizer.validate()?;
        let names = ["l_oa", "l_ab", "l_bc"];
        for (k, name) in names.iter().enumerate() {
            if self.optimizer.bounds.lo[k] <= 0.0 {
                return Err(Error::validation(
                    format!("optimizer.bounds.{name}"),
                    "lengths must stay positive",
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_config()
    }

    /// Serializes with angles in radians, so a reload reproduces every value exactly.
    pub fn to_json(&self) -> String {
        let m = &self.mechanism;
        let t = &self.task;
        let o = &self.optimizer;
        let b = &o.bounds;
        let value = serde_json::json!({
            "mechanism": {
                "pivot_c": [m.pivot_c.x, m.pivot_c.y],
                "effector_offset": m.effector_offset,
                "link_density": m.link_density,
                "payload_mass": m.payload_mass,
                "effector_tip_length": m.effector_tip_length,
                "tip_force": [m.tip_force.x, m.tip_force.y],
                "gravity": [m.gravity.x, m.gravity.y],
                "baseline": m.baseline,
                "branch": m.branch,
                "overshoot_cap": m.overshoot_cap,
            },
            "task": {
                "delta_i": t.delta_i,
                "delta_e": t.delta_e,
                "t_move": t.t_move,
                "t_dwell": t.t_dwell,
                "n_samples": t.n_samples,
            },
            "optimizer": {
                "bounds": RawBounds {
                    l_oa: [b.lo[0], b.hi[0]],
                    l_ab: [b.lo[1], b.hi[1]],
                    l_bc: [b.lo[2], b.hi[2]],
                },
                "n_init": o.n_init,
                "n_max": o.n_max,
                "n_acq_starts": o.n_acq_starts,
                "n_acq_samples": o.n_acq_samples,
                "seed": o.seed,
            }
        });
        serde_json::to_string_pretty(&value).expect("config serializes")
    }

    /// The desk-scale reference problem used throughout the tests and docs.
    pub fn canonical() -> Self {
        ProblemConfig {
            mechanism: MechanismConfig {
                pivot_c: Vec2::new(0.30, 0.0),
                effector_offset: 0.0,
                link_density: [2.0, 2.0, 2.0],
                payload_mass: 0.5,
                effector_tip_length: 0.25,
                tip_force: Vec2::ZERO,
                gravity: Vec2::new(0.0, -9.81),
                baseline: DesignParams { l_oa: 0.10, l_ab: 0.25, l_bc: 0.15 },
                branch: Branch::Plus,
                overshoot_cap: DEFAULT_OVERSHOOT_CAP,
            },
            task: MotionTask {
                delta_i: 150f64.to_radians(),
                delta_e: 90f64.to_radians(),
                t_move: 0.5,
                t_dwell: 0.0,
                n_samples: 201,
            },
            optimizer: OptimizerConfig::default_with_bounds(Bounds::new(
                vec![0.03, 0.15, 0.08],
                vec![0.14, 0.34, 0.25],
            )),
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<(MechanismConfig, MotionTask, OptimizerConfig)> {
    let cfg = load_problem(path)?;
    Ok((cfg.mechanism, cfg.task, cfg.optimizer))
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)?;
    ProblemConfig::from_json(&text)
}
