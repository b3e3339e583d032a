use alloc::boxed::Box;
use alloc::string::String;

use crate::qp::QpStatus;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arc length {s} m is outside the road extent [0, {length}] m")]
    OutOfExtent { s: f64, length: f64 },

    #[error("position {s} m requires extrapolation beyond the belief range [{start}, {end}] m")]
    Extrapolation { s: f64, start: f64, end: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("quantile probability {0} is outside (0, 1)")]
    QuantileDomain(f64),

    #[error("funnel fraction rho = {0} is outside [0, 1)")]
    InvalidRho(f64),

    #[error("invalid QP: {0}")]
    InvalidProblem(String),

    #[error("planner QP ended with status {status:?}; violating block: {block}")]
    PlannerFailed { status: QpStatus, block: &'static str },

    #[error("closed loop aborted at step {k}: {source}")]
    ClosedLoop { k: usize, source: Box<Error> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
