use thiserror::Error;

use crate::models::PrimitiveKind;
use crate::shs::RateSymbol;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid rate {name} = {value}: rates must be finite and non-negative")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("fixed point entry v[{state}][{component}] = {value:e} is negative")]
    NegativeFixedPoint {
        state: usize,
        component: usize,
        value: f64,
    },

    #[error("{0} has no closed-form delivery probability")]
    Unsupported(PrimitiveKind),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error(
        "simulated transition {from} -> {to} on {symbol} at t = {time} is not in the {model} table"
    )]
    UnlistedTransition {
        model: String,
        from: usize,
        to: usize,
        symbol: RateSymbol,
        time: f64,
    },

    #[error("invariant violated at t = {time}: {what}")]
    SimInvariant { time: f64, what: String },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("unknown figure {0:?} (expected one of 3a, 3b, 4a, 4b, 5a, 5b, 6)")]
    UnknownFigure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
