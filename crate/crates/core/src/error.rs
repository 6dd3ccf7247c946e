use thiserror::Error;

use crate::executor::ExecutionFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position ({x:.3}, {y:.3}) lies outside the map extent")]
    OutOfBounds { x: f64, y: f64 },

    #[error("cell ({row}, {col}) is outside the grid")]
    CellOutOfBounds { row: usize, col: usize },

    #[error("cell ({row}, {col}) has no observed elevation")]
    Unobserved { row: usize, col: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("grid geometry mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("start cell ({row}, {col}) is not ground-traversable")]
    StartNotGround { row: usize, col: usize },

    #[error("no path between start and goal")]
    NoPath,

    #[error("execution failed: {}", .0.reason)]
    Execution(Box<ExecutionFailure>),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True when the planner found no route, as opposed to bad input or I/O.
    pub fn is_no_path(&self) -> bool {
        matches!(self.root(), Error::NoPath)
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
