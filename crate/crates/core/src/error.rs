use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("baseline design cannot be assembled at delta = {delta} rad")]
    BaselineInfeasible { delta: f64 },

    #[error("baseline crank angle is not strictly monotonic over the stroke")]
    BaselineDefective,

    #[error("linkage cannot be assembled")]
    NotAssemblable,

    #[error("crank and coupler are collinear (dead point)")]
    SingularPosture,

    #[error("kinematic transformation has no solution at delta = {delta} rad")]
    TransformUnsolvable { delta: f64 },

    #[error("kinematic transformation cannot be seeded at the stroke midpoint")]
    SeedUnsolvable,

    #[error("torque is undefined at a transmission singularity (t = {t} s)")]
    SingularState { t: f64 },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("surrogate model: {0}")]
    Surrogate(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }

    /// Configuration problems, as opposed to failures while running a computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Validation { .. }
                | Error::BaselineInfeasible { .. }
                | Error::BaselineDefective
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
