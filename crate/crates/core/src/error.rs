use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state space of {states} states exceeds the enumeration cap of {cap}")]
    EnumerationInfeasible { states: String, cap: u64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mean is zero; relative variance is undefined")]
    DegenerateFunction,

    #[error("stage {stage} has a zero sample mean")]
    DegenerateStage { stage: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("binary search contract violated: predicate is false at the left endpoint {0}")]
    PredicateFalseAtStart(f64),

    #[error("ratio estimate has no samples in the interval at the denominator temperature")]
    ZeroDenominator,

    #[error("no admissible interval remains outside the forbidden set")]
    NoAdmissibleInterval,

    #[error("schedule generation failed: {reason}")]
    ScheduleFailure {
        reason: String,
        move_log: Vec<crate::schedule::MoveRecord>,
    },

    #[error("jump by measurement failed after {measurements} measurements")]
    JumpFailure { measurements: u64 },

    #[error("statevector simulation of dimension {dimension} exceeds cap {cap}")]
    SimulationTooLarge { dimension: u64, cap: u64 },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: usize) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
