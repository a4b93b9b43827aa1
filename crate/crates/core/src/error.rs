use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(Diagnosis),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Process exit code used by the `dispatch` binary.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Infeasible(_) => 2,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Dimension(_)
            | Error::InvalidArgument(_)
            | Error::Io(_)
            | Error::Serialization(_) => 3,
            Error::Solver(_) | Error::Invariant(_) => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

/// Why a problem has no feasible point.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnosis {
    /// Demand exceeds every generator at its maximum plus every wind reserve.
    InadequateSupply { demand_mw: f64, capacity_mw: f64 },
    /// Minimum conventional output alone exceeds demand.
    ExcessMinimumGeneration { demand_mw: f64, minimum_mw: f64 },
    /// Supply is adequate in aggregate but the network cannot carry it.
    Congestion { overloaded_lines: Vec<usize> },
    /// Equality constraints contradict each other.
    InconsistentEqualities,
    /// The solver reported infeasibility without a more specific cause.
    Unknown,
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnosis::InadequateSupply { demand_mw, capacity_mw } => write!(
                f,
                "inadequate supply (demand {demand_mw:.3} MW exceeds available {capacity_mw:.3} MW)"
            ),
            Diagnosis::ExcessMinimumGeneration { demand_mw, minimum_mw } => write!(
                f,
                "excess minimum generation ({minimum_mw:.3} MW minimum output above demand {demand_mw:.3} MW)"
            ),
            Diagnosis::Congestion { overloaded_lines } => {
                write!(f, "network congestion (lines {overloaded_lines:?} cannot carry the dispatch)")
            }
            Diagnosis::InconsistentEqualities => write!(f, "inconsistent equality constraints"),
            Diagnosis::Unknown => write!(f, "no feasible point found"),
        }
    }
}
