use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Stable, machine-readable error category. The CLI prints it verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Domain,
    Numeric,
    Io,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Parse => "E_PARSE",
            ErrorKind::Domain => "E_DOMAIN",
            ErrorKind::Numeric => "E_NUMERIC",
            ErrorKind::Io => "E_IO",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("column {column} is constant and cannot be standardized")]
    DegenerateColumn { column: usize },
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigenvalue {value:e} is negative beyond the clipping tolerance")]
    NegativeEigenvalue { value: f64 },
    #[error("eigen reconstruction error {error:e} exceeds tolerance")]
    Reconstruction { error: f64 },
    #[error("log of non-positive eigenvalue {value:e} at rank {rank}")]
    LogNonPositive { rank: usize, value: f64 },
    #[error("spike {alpha} lies inside the bulk atom range [{lower}, {upper}]")]
    SpikeInsideBulk { alpha: f64, lower: f64, upper: f64 },
    #[error("no admissible inverse of the spike map for {value} on the {side} branch")]
    NoInverse { value: f64, side: &'static str },
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numeric(String),
    #[error("syntax error in {what}: {message}")]
    Syntax { what: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Csv { .. } | Error::Syntax { .. } => ErrorKind::Parse,
            Error::Reconstruction { .. } | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Domain,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
