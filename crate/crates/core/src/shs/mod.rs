//! Generic stochastic hybrid system engine: stationary distributions of the
//! discrete-state chain and fixed points of the age-balance equations for any
//! model expressed as states, transitions and 2x2 reset maps.

mod model;
mod reset;
mod solve;

pub use model::{validate_model, AgeProcess, Diagnostic, RateSymbol, ShsModel, Transition};
pub use reset::ResetMap;
pub use solve::{
    age_balance_residual, average_age, global_balance_residual, solve_age_balance,
    stationary_distribution, AgeBalanceSolution, StationaryDistribution, BALANCE_TOLERANCE,
    NEGATIVITY_TOLERANCE,
};
