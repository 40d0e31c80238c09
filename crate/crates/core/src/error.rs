use thiserror::Error;

use crate::game_oracle::lp::LpError;

/// Errors raised by the analytic modules and the LP oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("an auction instance needs at least one bidder")]
    NoBidders,

    #[error("mean of bidder {index} is {value}, expected a value strictly inside (0, 1)")]
    MeanOutOfRange { index: usize, value: f64 },

    #[error("{what}: argument {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{what} has length {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),

    #[error("the LP oracle supports at most {max} bidders, got {actual}")]
    TooManyBidders { max: usize, actual: usize },

    #[error("discretized game has {profiles} profiles, above the dense limit of {limit}")]
    GameTooLarge { profiles: usize, limit: usize },

    #[error("a seller mixture needs one weight per reserve grid point and must sum to 1")]
    InvalidMixture,

    #[error(transparent)]
    Lp(#[from] LpError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain { what, value, domain }
}
