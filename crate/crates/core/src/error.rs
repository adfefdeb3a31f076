use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("{what} = {value} is out of range (must be < {bound})")]
    Range {
        what: &'static str,
        value: u64,
        bound: u64,
    },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("closed form outside its domain: sin^2 = {0}")]
    ClosedFormDomain(f64),

    #[error("cell is already at the deepest level {0}")]
    Level(u32),

    #[error("address layout needs {0} bits, at most 127 are available")]
    Overflow(u32),

    #[error("inconsistent measurement: {0}")]
    Inconsistent(String),

    #[error("bad table file: {0}")]
    Format(String),

    #[error("i/o: {msg}")]
    Io { kind: std::io::ErrorKind, msg: String },
}

impl Error {
    /// Short machine-readable tag, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Range { .. } => "range",
            Error::NoSolution(_) => "no_solution",
            Error::Infeasible(_) => "infeasible",
            Error::ClosedFormDomain(_) => "closed_form_domain",
            Error::Level(_) => "level",
            Error::Overflow(_) => "overflow",
            Error::Inconsistent(_) => "inconsistent",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }
}
