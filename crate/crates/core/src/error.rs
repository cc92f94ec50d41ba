use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an API precondition (shapes, fractional association, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("QoS threshold {q_min} is unreachable (maximum achievable quality is {max_quality})")]
    InfeasibleQos { q_min: f64, max_quality: f64 },

    #[error("delay budget cannot be met{}: {reason}", pair_suffix(*.pair))]
    InfeasibleDelay {
        /// `(user, edge)` when known.
        pair: Option<(usize, usize)>,
        reason: String,
    },

    #[error("edge {edge} cannot host its minimum CPU footprint: needs {required_hz} Hz, has {capacity_hz} Hz")]
    InfeasibleCapacity {
        edge: usize,
        required_hz: f64,
        capacity_hz: f64,
    },

    #[error("user {user} has no feasible edge node")]
    InfeasibleUser { user: usize },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("oracle refused instance: {0}")]
    OracleRefused(String),

    #[error("oracle found no feasible association")]
    OracleInfeasible,

    #[error("i/o error: {0}")]
    Io(String),
}

fn pair_suffix(pair: Option<(usize, usize)>) -> String {
    pair.map(|(u, n)| format!(" for user {u} on edge {n}"))
        .unwrap_or_default()
}

impl Error {
    /// True for the infeasibility family (QoS, delay, capacity, user, oracle).
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleQos { .. }
                | Error::InfeasibleDelay { .. }
                | Error::InfeasibleCapacity { .. }
                | Error::InfeasibleUser { .. }
                | Error::OracleInfeasible
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
