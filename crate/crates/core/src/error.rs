use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no polytope faces: spheres have no face decomposition")]
    NoPolytopeFaces,

    #[error("crowding undefined: cell average {0} is not positive")]
    CrowdingUndefined(f64),

    /// The cell average (or the padded average) lies outside the positive set.
    #[error("cell average violates positivity in cell {cell} at t={time}: {detail}")]
    AverageOutsidePositiveSet { cell: usize, time: f64, detail: String },

    #[error("trace state outside positive set in cell {cell} at t={time}: {detail}")]
    TraceNotPositive { cell: usize, time: f64, detail: String },

    #[error("time step collapse at t={time}: dt={dt} after {retries} retries")]
    TimeStepCollapse { time: f64, dt: f64, retries: usize },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Attaches a cell index and time to errors raised by per-cell routines.
    pub fn at(self, cell: usize, time: f64) -> Self {
        match self {
            Error::AverageOutsidePositiveSet { detail, .. } => Error::AverageOutsidePositiveSet { cell, time, detail },
            Error::TraceNotPositive { detail, .. } => Error::TraceNotPositive { cell, time, detail },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
