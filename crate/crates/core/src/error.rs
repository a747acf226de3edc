use thiserror::Error;

use crate::integrator::BlowUp;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("dyadic bank: {0}")]
    Bank(String),

    #[error("invalid Lebesgue index p = {0}")]
    InvalidLebesgue(f64),

    #[error("time went backwards: last sample at t = {last}, got t = {got}")]
    TimeReversed { last: f64, got: f64 },

    #[error("model parameters outside the supported regime: {0}")]
    UnsupportedRegime(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    BlowUp(BlowUp),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
