use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no closed-form absolute moment of order {p} for {law} jumps")]
    UnsupportedMoment { law: &'static str, p: f64 },

    #[error("quadrature window for {law} jumps leaves {deficit:e} of the mass uncovered (tolerance {tolerance:e})")]
    QuadratureTruncation {
        law: &'static str,
        deficit: f64,
        tolerance: f64,
    },

    #[error("time {time} is not a node of the fine grid with {steps} steps on [0, {horizon}]")]
    OffGrid { time: f64, horizon: f64, steps: usize },

    #[error("time {time} lies outside [0, {horizon}]")]
    OutOfHorizon { time: f64, horizon: f64 },

    #[error("{coarse} does not divide the fine step count {fine}")]
    NotADivisor { coarse: usize, fine: usize },

    #[error("grid horizon {grid} does not match noise horizon {noise}")]
    HorizonMismatch { grid: f64, noise: f64 },

    #[error("coefficient set is not {expected}")]
    WrongModel { expected: &'static str },

    #[error("noise value exceeds the exactly representable range of the fixed-point lattice")]
    LatticeOverflow,

    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("error estimate {value} at n = {n} is not positive")]
    NonPositiveError { n: usize, value: f64 },

    #[error("empty sample set")]
    EmptySamples,
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
