//! Age of Information of location and app updates in a shared-memory packet
//! forwarder whose FIB is synchronized by RCU or by a write-preferring
//! readers-writer lock.
//!
//! [`shs`] holds the generic stochastic hybrid system solver, [`models`] the
//! RCU/RWL transition tables and closed forms, [`sim`] an independent
//! discrete-event simulator of the forwarder, and [`sweep`] the parameter
//! sweeps, figure presets and the analytic-vs-simulation verification suite.

pub mod error;
pub mod models;
pub mod params;
pub mod shs;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
pub use models::{analyze, build_model, delivery_probability, Analysis, Primitive, PrimitiveKind};
pub use params::RateParams;
