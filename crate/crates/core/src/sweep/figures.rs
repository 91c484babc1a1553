use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{rows_to_csv_with_notes, run_sweep, Grid, SweepSpec};
use crate::error::{Error, Result};
use crate::models::{analyze, Primitive, PrimitiveKind};
use crate::params::RateParams;

/// RCU reads are an order of magnitude faster than writes in every preset.
pub const SIGMA_RCU: f64 = 10.0;
pub const FIGURE_BETAS: [f64; 2] = [1.0, 10.0];
/// Read-request rate for the location-age figure, whose caption leaves it open.
pub const FIGURE_6_BETA: f64 = 10.0;

pub fn figure_grid() -> Grid {
    Grid::linear(0.005, 0.1, 20)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Figure {
    F3a,
    F3b,
    F4a,
    F4b,
    F5a,
    F5b,
    F6,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::F3a,
        Figure::F3b,
        Figure::F4a,
        Figure::F4b,
        Figure::F5a,
        Figure::F5b,
        Figure::F6,
    ];

    fn title(&self) -> &'static str {
        match self {
            Figure::F3a | Figure::F3b => "average app age E[Delta] at the mobile (column age_app)",
            Figure::F4a | Figure::F4b => {
                "probability an arriving app update is delivered (column delivery)"
            }
            Figure::F5a | Figure::F5b => {
                "app age E[Delta] with and without reader preemption (column age_app)"
            }
            Figure::F6 => "average location age E[Delta_hat] in the FIB (column age_location)",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::F3a => "3a",
            Figure::F3b => "3b",
            Figure::F4a => "4a",
            Figure::F4b => "4b",
            Figure::F5a => "5a",
            Figure::F5b => "5b",
            Figure::F6 => "6",
        })
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// The analytic sweeps behind a figure, one per read-request rate `β`.
pub fn figure_sweeps(figure: Figure) -> Vec<SweepSpec> {
    let (kinds, sigma_rwl, betas): (Vec<PrimitiveKind>, f64, &[f64]) = match figure {
        Figure::F3a | Figure::F4a => (
            vec![PrimitiveKind::RCU_P, PrimitiveKind::RWL_P],
            1.0,
            &FIGURE_BETAS,
        ),
        Figure::F3b | Figure::F4b => (
            vec![PrimitiveKind::RCU_P, PrimitiveKind::RWL_P],
            10.0,
            &FIGURE_BETAS,
        ),
        Figure::F5a => (
            vec![PrimitiveKind::RCU_P, PrimitiveKind::RCU_NP],
            1.0,
            &FIGURE_BETAS,
        ),
        Figure::F5b => (
            vec![PrimitiveKind::RWL_P, PrimitiveKind::RWL_NP],
            1.0,
            &FIGURE_BETAS,
        ),
        Figure::F6 => (
            vec![PrimitiveKind::RCU_P, PrimitiveKind::RWL_P],
            1.0,
            &[FIGURE_6_BETA],
        ),
    };
    betas
        .iter()
        .map(|&beta| {
            let mut spec = SweepSpec::rho_hat_sweep(figure_grid(), beta, SIGMA_RCU, sigma_rwl);
            spec.kinds = kinds.clone();
            spec
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreemptionGain {
    pub primitive: Primitive,
    pub sigma: f64,
    pub beta: f64,
    /// `(ρ̂, 1 − E[Δ]_preemptive / E[Δ]_non-preemptive)` per grid point.
    pub gains: Vec<(f64, f64)>,
    pub max_gain: f64,
    pub rho_hat_at_max: f64,
}

/// Relative app-age reduction from reader preemption across a `ρ̂` grid.
pub fn max_preemption_gain(
    primitive: Primitive,
    sigma: f64,
    beta: f64,
    grid: &Grid,
) -> Result<PreemptionGain> {
    grid.validate()?;
    let mut gains = Vec::with_capacity(grid.points);
    for r in grid.values() {
        let params = RateParams::normalized(r, beta, sigma)?;
        let with = analyze(PrimitiveKind::new(primitive, true), &params)?.age_app();
        let without = analyze(PrimitiveKind::new(primitive, false), &params)?.age_app();
        gains.push((r, (without - with) / without));
    }
    let &(rho_hat_at_max, max_gain) = gains
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid has points");
    Ok(PreemptionGain {
        primitive,
        sigma,
        beta,
        gains,
        max_gain,
        rho_hat_at_max,
    })
}

/// CSV data for one figure, with `#` comment lines describing the preset.
pub fn figure_data(figure: Figure) -> Result<String> {
    let specs = figure_sweeps(figure);
    let mut notes = vec![format!("figure {figure}: {}", figure.title())];
    let s = &specs[0];
    notes.push(format!(
        "mu_hat = 1, sigma_rcu = {}, sigma_rwl = {}, rho_hat grid {}..{} ({} points)",
        s.sigma_rcu, s.sigma_rwl, s.grid.start, s.grid.stop, s.grid.points
    ));
    if figure == Figure::F6 {
        notes.push(format!(
            "beta = {FIGURE_6_BETA} is an assumed value for this figure"
        ));
    }
    if let Figure::F5a | Figure::F5b = figure {
        let primitive = s.kinds[0].primitive;
        let sigma = match primitive {
            Primitive::Rcu => s.sigma_rcu,
            Primitive::Rwl => s.sigma_rwl,
        };
        for spec in &specs {
            let g = max_preemption_gain(primitive, sigma, spec.beta, &spec.grid)?;
            notes.push(format!(
                "beta = {}: max preemption gain {:.2}% at rho_hat = {}",
                spec.beta,
                100.0 * g.max_gain,
                g.rho_hat_at_max
            ));
        }
    }
    let mut rows = Vec::new();
    for spec in &specs {
        rows.extend(run_sweep(spec)?);
    }
    Ok(rows_to_csv_with_notes(&rows, &notes))
}
