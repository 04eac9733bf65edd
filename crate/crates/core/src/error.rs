use std::path::PathBuf;

use thiserror::Error;

/// Problems found while reading or validating a case file.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("case file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("bus ids must be contiguous 1..{count}; bus {id} is out of range")]
    NonContiguousBus { id: usize, count: usize },
    #[error("duplicate branch id {0}")]
    DuplicateBranch(usize),
    #[error("branch {branch} references unknown bus {bus}")]
    DanglingBus { branch: usize, bus: usize },
    #[error("branch {0} connects a bus to itself")]
    SelfLoop(usize),
    #[error("branch {branch} duplicates the bus pair of branch {other}")]
    ParallelBranch { branch: usize, other: usize },
    #[error("branch {0} has non-positive reactance")]
    NonPositiveReactance(usize),
    #[error("branch {0} has non-positive power threshold")]
    NonPositiveThreshold(usize),
    #[error("bus {0} has a non-finite injection")]
    NonFiniteInjection(usize),
    #[error("case has no reference (R) bus")]
    NoReferenceBus,
    #[error("case has no buses")]
    Empty,
}

/// Numerical and configuration failures inside the model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(
        "reduced admittance block of the island referenced at bus {reference_bus} is singular \
         (condition estimate {condition:.3e})"
    )]
    SingularIsland { reference_bus: usize, condition: f64 },
    #[error(
        "branch {branch}: threshold {threshold} is too small for sigma {sigma} \
         (need threshold^2 > pi/(2 sigma))"
    )]
    EmptyHealthyRegime { branch: usize, threshold: f64, sigma: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown branch id {0}")]
    UnknownBranch(usize),
    #[error("control u_{step} = {value} is nonzero outside the control horizon")]
    ControlOutsideHorizon { step: usize, value: f64 },
    #[error("power flow failed at cascade step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<ModelError>,
    },
}

impl ModelError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ ModelError::AtStep { .. } => e,
            e => ModelError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
