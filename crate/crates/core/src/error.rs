use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("participating device count {kse} outside [1, {total}]")]
    KseOutOfRange { kse: usize, total: usize },

    #[error("round bound has no real root at K_SE={kse} (discriminant {discriminant:e})")]
    DiscriminantNegative { kse: usize, discriminant: f64 },

    #[error("round bound is degenerate at K_SE={kse}: quadratic coefficient U1 is zero")]
    DegenerateBound { kse: usize },

    #[error("no admissible round count found below scan cap {cap}")]
    NoRootInRange { cap: u64 },

    #[error("round bound infeasible for every K_SE in [1, {total}]")]
    AllInfeasible { total: usize },

    #[error("zero achievable rate for device {device}")]
    ZeroRate { device: usize },

    #[error("infeasible assignment: {0}")]
    InfeasibleAssignment(String),

    #[error("{subchannels} sub-channels cannot serve {devices} devices")]
    TooFewChannels { devices: usize, subchannels: usize },

    #[error("exhaustive search over {partitions} partitions exceeds limit {limit}")]
    InstanceTooLarge { partitions: u128, limit: u128 },

    #[error("coalition game did not settle within {cap} sweeps")]
    IterationCap { cap: usize },

    #[error("aggregation needs at least one participant")]
    EmptyParticipantSet,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Process exit code for the error's category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidParams(_) | Error::KseOutOfRange { .. } => 2,
            Error::Io { .. } | Error::Csv { .. } => 3,
            Error::AllInfeasible { .. }
            | Error::DiscriminantNegative { .. }
            | Error::DegenerateBound { .. }
            | Error::NoRootInRange { .. } => 4,
            Error::ZeroRate { .. }
            | Error::InfeasibleAssignment(_)
            | Error::TooFewChannels { .. }
            | Error::InstanceTooLarge { .. }
            | Error::IterationCap { .. }
            | Error::EmptyParticipantSet => 5,
        }
    }
}
