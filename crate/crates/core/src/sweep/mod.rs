//! Parameter sweeps over the normalized rates, figure presets and the
//! analytic-vs-simulation verification suite.

mod figures;
mod verify;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use figures::{figure_data, figure_sweeps, max_preemption_gain, Figure, PreemptionGain};
pub use verify::{verify, verify_with, CheckResult, VerifyOptions, VerifyReport};

use crate::error::{Error, Result};
use crate::models::{analyze, Primitive, PrimitiveKind};
use crate::params::RateParams;
use crate::sim::{run_sim, Estimate, SimConfig, DEFAULT_BATCHES, DEFAULT_WARMUP_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    RhoHat,
    Beta,
    Sigma,
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rho_hat" => Ok(SweepVar::RhoHat),
            "beta" => Ok(SweepVar::Beta),
            "sigma" => Ok(SweepVar::Sigma),
            _ => Err(format!("unknown sweep variable {s:?} (rho_hat, beta or sigma)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start,
            stop,
            points,
            spacing: Spacing::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start >= self.stop {
            return Err(Error::InvalidSweep(format!(
                "grid start {} must be below stop {}",
                self.start, self.stop
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidSweep("a grid needs at least 2 points".into()));
        }
        if self.start <= 0.0 {
            return Err(Error::InvalidSweep(format!(
                "grid start must be positive (the chains are not ergodic at 0), got {}",
                self.start
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    return self.stop;
                }
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + f * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + f * (self.stop / self.start).ln()).exp(),
                }
            })
            .collect()
    }
}

/// `start:stop:points`, e.g. `0.005:0.1:20`, optionally suffixed `:log`.
impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let spacing = match parts.get(3).copied() {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(format!("unknown spacing {other:?}")),
        };
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected start:stop:points, got {s:?}"));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        Ok(Grid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            points: parts[2].parse().map_err(|e| format!("{:?}: {e}", parts[2]))?,
            spacing,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    Simulate,
    Both,
}

impl Mode {
    fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    fn simulate(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub horizon: f64,
    pub seed: u64,
    pub batches: usize,
    pub warmup_fraction: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: 1e6,
            seed: 1,
            batches: DEFAULT_BATCHES,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kinds: Vec<PrimitiveKind>,
    pub variable: SweepVar,
    pub grid: Grid,
    pub rho_hat: f64,
    pub beta: f64,
    pub sigma_rcu: f64,
    pub sigma_rwl: f64,
    pub mode: Mode,
    pub sim: SimSettings,
}

impl SweepSpec {
    /// Analytic sweep of `ρ̂` over `grid` for both preemptive kinds.
    pub fn rho_hat_sweep(grid: Grid, beta: f64, sigma_rcu: f64, sigma_rwl: f64) -> Self {
        Self {
            kinds: vec![PrimitiveKind::RCU_P, PrimitiveKind::RWL_P],
            variable: SweepVar::RhoHat,
            grid,
            rho_hat: grid.start,
            beta,
            sigma_rcu,
            sigma_rwl,
            mode: Mode::Analytic,
            sim: SimSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.kinds.is_empty() {
            return Err(Error::InvalidSweep("no models selected".into()));
        }
        for (name, v) in [
            ("rho_hat", self.rho_hat),
            ("beta", self.beta),
            ("sigma_rcu", self.sigma_rcu),
            ("sigma_rwl", self.sigma_rwl),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSweep(format!("{name} must be positive, got {v}")));
            }
        }
        if self.mode.simulate() {
            SimConfig {
                kind: self.kinds[0],
                params: RateParams::normalized(1.0, 1.0, 1.0)?,
                horizon: self.sim.horizon,
                warmup_fraction: self.sim.warmup_fraction,
                seed: self.sim.seed,
                batches: self.sim.batches,
            }
            .validate()
            .map_err(|e| Error::InvalidSweep(e.to_string()))?;
        }
        Ok(())
    }

    fn sigma(&self, kind: PrimitiveKind) -> f64 {
        match kind.primitive {
            Primitive::Rcu => self.sigma_rcu,
            Primitive::Rwl => self.sigma_rwl,
        }
    }

    /// `(kind, ρ̂, β, σ)` per row, grid point outer and kind inner.
    fn points(&self) -> Vec<(PrimitiveKind, f64, f64, f64)> {
        let mut out = Vec::new();
        for x in self.grid.values() {
            for &kind in &self.kinds {
                let (mut r, mut b, mut s) = (self.rho_hat, self.beta, self.sigma(kind));
                match self.variable {
                    SweepVar::RhoHat => r = x,
                    SweepVar::Beta => b = x,
                    SweepVar::Sigma => s = x,
                }
                out.push((kind, r, b, s));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: PrimitiveKind,
    pub rho_hat: f64,
    pub beta: f64,
    pub sigma: f64,
    pub age_app: Option<f64>,
    pub age_location: Option<f64>,
    pub delivery: Option<f64>,
    pub sim_age_app: Option<Estimate>,
    pub sim_age_location: Option<Estimate>,
    pub sim_delivery: Option<Estimate>,
    /// Row-level failure; the other rows are still computed.
    pub error: Option<String>,
}

fn compute_row(
    spec: &SweepSpec,
    index: usize,
    (kind, r, b, s): (PrimitiveKind, f64, f64, f64),
) -> SweepRow {
    let mut row = SweepRow {
        kind,
        rho_hat: r,
        beta: b,
        sigma: s,
        age_app: None,
        age_location: None,
        delivery: None,
        sim_age_app: None,
        sim_age_location: None,
        sim_delivery: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let params = RateParams::normalized(r, b, s)?;
        if spec.mode.analytic() {
            let a = analyze(kind, &params)?;
            row.age_app = Some(a.age_app());
            row.age_location = Some(a.age_location());
            row.delivery = a.delivery;
        }
        if spec.mode.simulate() {
            let config = SimConfig {
                kind,
                params,
                horizon: spec.sim.horizon,
                warmup_fraction: spec.sim.warmup_fraction,
                seed: spec.sim.seed.wrapping_add(index as u64),
                batches: spec.sim.batches,
            };
            let sim = run_sim(&config)?;
            row.sim_age_app = Some(sim.app_estimate());
            row.sim_age_location = Some(sim.location_estimate());
            row.sim_delivery = sim.delivery_estimate();
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// One row per (grid point, kind), in grid order. Rows are computed in
/// parallel; row `i` simulates with seed `sim.seed + i`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points();
    Ok(points
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| compute_row(spec, i, p))
        .collect())
}

pub const CSV_HEADER: [&str; 15] = [
    "model",
    "preemptive",
    "rho_hat",
    "beta",
    "sigma",
    "age_app",
    "age_location",
    "delivery",
    "sim_age_app",
    "sim_age_app_ci",
    "sim_age_location",
    "sim_age_location_ci",
    "sim_delivery",
    "sim_delivery_ci",
    "error",
];

/// Decimal notation with 12 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

struct Cell(Option<f64>);

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(x) => f.write_str(&format_sig(x)),
            None => Ok(()),
        }
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    rows_to_csv_with_notes(rows, &[])
}

/// CSV with optional leading `# ` comment lines.
pub fn rows_to_csv_with_notes(rows: &[SweepRow], notes: &[String]) -> String {
    let mut out = String::new();
    for note in notes {
        out.push_str("# ");
        out.push_str(note);
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        let est = |e: &Option<Estimate>| {
            (
                Cell(e.map(|e| e.mean)).to_string(),
                Cell(e.map(|e| e.half_width)).to_string(),
            )
        };
        let (app, app_ci) = est(&r.sim_age_app);
        let (loc, loc_ci) = est(&r.sim_age_location);
        let (del, del_ci) = est(&r.sim_delivery);
        w.write_record([
            r.kind.primitive.to_string(),
            r.kind.preemptive.to_string(),
            format_sig(r.rho_hat),
            format_sig(r.beta),
            format_sig(r.sigma),
            Cell(r.age_app).to_string(),
            Cell(r.age_location).to_string(),
            Cell(r.delivery).to_string(),
            app,
            app_ci,
            loc,
            loc_ci,
            del,
            del_ci,
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    out.push_str(&String::from_utf8(bytes).expect("CSV is UTF-8"));
    out
}
