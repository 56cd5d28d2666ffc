use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV or config file did not match its schema.
    #[error("{source_name}: line {line}, column `{column}`: {message}")]
    Parse {
        source_name: String,
        line: u64,
        column: String,
        message: String,
    },

    /// Structurally valid input that violates a dataset invariant
    /// (duplicate keys, unknown plants, ...).
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// `ln(value + delta)` with a nonpositive argument.
    #[error("log domain error in `{variable}`: ln({value} + {delta}) is undefined")]
    LogDomain {
        variable: String,
        value: f64,
        delta: f64,
    },

    #[error("fixed-effect absorption did not converge after {sweeps} sweeps (last max group mean {last_delta:e})")]
    NotConverged { sweeps: usize, last_delta: f64 },

    #[error("design matrix is rank deficient; linearly dependent column(s): {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the estimation machinery itself, as opposed to
    /// bad inputs.
    pub fn is_estimation(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::RankDeficient { .. }
                | Error::Estimation(_)
                | Error::LogDomain { .. }
                | Error::UndefinedCorrelation(_)
        )
    }
}
