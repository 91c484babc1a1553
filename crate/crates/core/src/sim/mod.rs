//! Discrete-event simulator of the forwarder: a mobile terminal issuing
//! location updates, a FIB writer and a FIB reader synchronized by RCU or a
//! write-preferring readers-writer lock.
//!
//! Every processed event is classified into the five-state chain before and
//! after it fires, and the observed state change together with the observed
//! age resets must match a row of the model's transition table. A mismatch
//! aborts the run with [`Error::UnlistedTransition`].

mod engine;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use stats::{t_quantile_975, Estimate};

use crate::error::{Error, Result};
use crate::models::{build_model, PrimitiveKind, NUM_STATES};
use crate::params::RateParams;
use crate::shs::{self, ShsModel};

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub kind: PrimitiveKind,
    pub params: RateParams,
    /// Simulated time units.
    pub horizon: f64,
    /// Fraction of the horizon discarded before statistics are collected.
    pub warmup_fraction: f64,
    pub seed: u64,
    /// Number of batches for batch-means confidence intervals.
    pub batches: usize,
}

impl SimConfig {
    pub fn new(kind: PrimitiveKind, params: RateParams, horizon: f64, seed: u64) -> Self {
        Self {
            kind,
            params,
            horizon,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            seed,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig(format!(
                "warmup fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.batches < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 batches, got {}",
                self.batches
            )));
        }
        self.params
            .require_positive()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub location_arrivals: u64,
    pub app_arrivals: u64,
    pub writes_completed: u64,
    /// Writes restarted because a fresher location update arrived.
    pub writes_preempted: u64,
    pub reads_completed: u64,
    pub app_delivered: u64,
    pub app_misaddressed: u64,
    /// App updates replaced at the reader by a fresher one.
    pub app_preempted: u64,
    /// App updates dropped on arrival (non-preemptive reader busy).
    pub app_discarded: u64,
    /// Events that moved the chain along a table transition.
    pub transitions: u64,
}

/// Outcome of one simulation run. Statistics cover the post-warmup window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub kind: PrimitiveKind,
    pub params: RateParams,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub batches: usize,
    /// Time average of the app age at the mobile terminal, `x1`.
    pub avg_age_app: f64,
    /// Time average of the location age in the FIB, `x̂1`.
    pub avg_age_location: f64,
    /// Delivered / arrived app updates; `None` when no app update arrived.
    pub delivery_fraction: Option<f64>,
    pub occupancy: [f64; NUM_STATES],
    /// 95% batch-means confidence half-widths.
    pub ci_app: f64,
    pub ci_location: f64,
    pub ci_delivery: Option<f64>,
    /// Batch-means standard errors.
    pub se_app: f64,
    pub se_location: f64,
    pub se_delivery: Option<f64>,
    pub se_occupancy: [f64; NUM_STATES],
    pub event_counts: EventCounts,
    /// How often each table transition (by id) was observed.
    pub transition_counts: BTreeMap<u32, u64>,
}

impl SimResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SimResult serializes")
    }

    pub fn app_estimate(&self) -> Estimate {
        Estimate {
            mean: self.avg_age_app,
            std_error: self.se_app,
            half_width: self.ci_app,
        }
    }

    pub fn location_estimate(&self) -> Estimate {
        Estimate {
            mean: self.avg_age_location,
            std_error: self.se_location,
            half_width: self.ci_location,
        }
    }

    pub fn delivery_estimate(&self) -> Option<Estimate> {
        Some(Estimate {
            mean: self.delivery_fraction?,
            std_error: self.se_delivery?,
            half_width: self.ci_delivery?,
        })
    }
}

/// Runs the simulator, checking every event against the shipped transition
/// table for `config.kind`.
pub fn run_sim(config: &SimConfig) -> Result<SimResult> {
    run_sim_against(config, &build_model(config.kind))
}

/// Runs the simulator, checking every event against `model`.
pub fn run_sim_against(config: &SimConfig, model: &ShsModel) -> Result<SimResult> {
    config.validate()?;
    let out = engine::Simulator::new(*config, model)?.run()?;
    let len = out.batch_len;
    let per_batch = |f: &dyn Fn(&engine::BatchTotals) -> f64| -> Vec<f64> {
        out.batches.iter().map(f).collect()
    };
    let app = Estimate::from_batches(&per_batch(&|b| b.area_app / len))
        .expect("at least two batches");
    let location = Estimate::from_batches(&per_batch(&|b| b.area_location / len))
        .expect("at least two batches");

    let delivered: u64 = out.batches.iter().map(|b| b.app_delivered).sum();
    let arrived: u64 = out.batches.iter().map(|b| b.app_arrivals).sum();
    let delivery_fraction = (arrived > 0).then(|| delivered as f64 / arrived as f64);
    let delivery_batches: Vec<f64> = out
        .batches
        .iter()
        .filter(|b| b.app_arrivals > 0)
        .map(|b| b.app_delivered as f64 / b.app_arrivals as f64)
        .collect();
    let delivery = Estimate::from_batches(&delivery_batches);

    let total_time: f64 = out.batches.iter().flat_map(|b| b.state_time).sum();
    let mut occupancy = [0.0; NUM_STATES];
    let mut se_occupancy = [0.0; NUM_STATES];
    for q in 0..NUM_STATES {
        occupancy[q] = out.batches.iter().map(|b| b.state_time[q]).sum::<f64>() / total_time;
        se_occupancy[q] = Estimate::from_batches(&per_batch(&|b| b.state_time[q] / len))
            .expect("at least two batches")
            .std_error;
    }

    Ok(SimResult {
        kind: config.kind,
        params: config.params,
        horizon: config.horizon,
        warmup: config.warmup_fraction * config.horizon,
        seed: config.seed,
        batches: config.batches,
        avg_age_app: app.mean,
        avg_age_location: location.mean,
        delivery_fraction,
        occupancy,
        ci_app: app.half_width,
        ci_location: location.half_width,
        ci_delivery: delivery.map(|d| d.half_width),
        se_app: app.std_error,
        se_location: location.std_error,
        se_delivery: delivery.map(|d| d.std_error),
        se_occupancy,
        event_counts: out.counts,
        transition_counts: out.transition_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub occupancy: [f64; NUM_STATES],
    pub pi: Vec<f64>,
    pub se_occupancy: [f64; NUM_STATES],
    /// `max_q |occupancy_q − π_q|`.
    pub max_deviation: f64,
    /// `max_q |occupancy_q − π_q| / se_q`.
    pub max_z: f64,
}

/// Compares the simulator's time-in-state fractions with the analytic
/// stationary distribution of the matching chain.
pub fn occupancy_check(config: &SimConfig) -> Result<OccupancyReport> {
    config.validate()?;
    let result = run_sim(config)?;
    let pi = shs::stationary_distribution(&build_model(config.kind), &config.params)?.pi;
    let mut max_deviation: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for ((occ, se), p) in result.occupancy.iter().zip(&result.se_occupancy).zip(&pi) {
        let dev = (occ - p).abs();
        max_deviation = max_deviation.max(dev);
        if dev > 0.0 {
            max_z = max_z.max(dev / se);
        }
    }
    Ok(OccupancyReport {
        occupancy: result.occupancy,
        pi,
        se_occupancy: result.se_occupancy,
        max_deviation,
        max_z,
    })
}
