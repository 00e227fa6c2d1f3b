use thiserror::Error;

use crate::graph::Mode;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown mode {0}")]
    UnknownMode(Mode),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix has no positive eigenvalue")]
    NoPositiveEigenvalue,

    #[error("no subset of modes yields a connected union graph")]
    NoConnectedSubset,

    #[error("too many modes for subset enumeration: {0} (limit 16)")]
    TooManyModes(usize),

    #[error("time {t} precedes schedule start {t0}")]
    BeforeStart { t: f64, t0: f64 },

    #[error("invalid interval [{t1}, {t2}]")]
    InvalidInterval { t1: f64, t2: f64 },

    #[error("time {t} lies beyond schedule horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "phase condition violated: integral of c is {integral:.12} rad, within tolerance of {nearest_k}*pi"
    )]
    PhaseCondition { integral: f64, nearest_k: i64 },

    #[error("step {step} contains {events} switch events (cap {cap}) near t = {t}")]
    EventDensity {
        t: f64,
        step: f64,
        events: usize,
        cap: usize,
    },

    #[error("window [{s}, {t}] outside trajectory span [{start}, {end}]")]
    WindowOutsideTrajectory {
        s: f64,
        t: f64,
        start: f64,
        end: f64,
    },

    #[error("negative radicand {0:.3e} in virtual output")]
    NegativeRadicand(f64),

    #[error("not enough samples: {0}")]
    NotEnoughSamples(String),

    #[error("Gronwall premise violated at t = {t} (excess {excess:.3e})")]
    GronwallPremise { t: f64, excess: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for problems with the caller's input, false for failures that
    /// arise while computing on valid input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidGraph(_)
                | Error::UnknownMode(_)
                | Error::TooManyModes(_)
                | Error::InvalidInterval { .. }
                | Error::InvalidSchedule(_)
                | Error::InvalidParameter(_)
                | Error::PhaseCondition { .. }
                | Error::Config(_)
        )
    }
}
