//! The RCU and RWL forwarder models: transition tables, closed-form
//! stationary distributions and delivery probabilities.
//!
//! States are shared by both primitives:
//!
//! | state | RCU                                   | RWL                                   |
//! |-------|---------------------------------------|---------------------------------------|
//! | 0     | idle                                  | idle                                  |
//! | 1     | writing                               | write lock held                       |
//! | 2     | writing, reader holds a stale address | write lock held, read pending         |
//! | 3     | reading a fresh address               | read lock held                        |
//! | 4     | published, reader holds stale address | read lock held, write pending         |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::RateParams;
use crate::shs::{
    self, AgeBalanceSolution, AgeProcess, RateSymbol, ResetMap, ShsModel, StationaryDistribution,
    Transition,
};

pub const NUM_STATES: usize = 5;

/// Transitions that exist only when the reader preempts its held app update.
pub const READER_PREEMPTION_IDS: [u32; 3] = [10, 11, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Rcu,
    Rwl,
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Primitive::Rcu => "rcu",
            Primitive::Rwl => "rwl",
        })
    }
}

impl FromStr for Primitive {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rcu" => Ok(Primitive::Rcu),
            "rwl" => Ok(Primitive::Rwl),
            _ => Err(format!("unknown primitive {s:?} (expected rcu or rwl)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimitiveKind {
    pub primitive: Primitive,
    /// Reader-side preemption of the held app update.
    pub preemptive: bool,
}

impl PrimitiveKind {
    pub const RCU_P: Self = Self::new(Primitive::Rcu, true);
    pub const RCU_NP: Self = Self::new(Primitive::Rcu, false);
    pub const RWL_P: Self = Self::new(Primitive::Rwl, true);
    pub const RWL_NP: Self = Self::new(Primitive::Rwl, false);
    pub const ALL: [Self; 4] = [Self::RCU_P, Self::RCU_NP, Self::RWL_P, Self::RWL_NP];

    pub const fn new(primitive: Primitive, preemptive: bool) -> Self {
        Self {
            primitive,
            preemptive,
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = if self.preemptive { "p" } else { "np" };
        write!(f, "{}-{suffix}", self.primitive)
    }
}

impl FromStr for PrimitiveKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (prim, preemptive) = match s.split_once('-') {
            None => (s, true),
            Some((p, "p")) => (p, true),
            Some((p, "np")) => (p, false),
            Some(_) => return Err(format!("bad kind {s:?} (expected e.g. rcu-p or rwl-np)")),
        };
        Ok(Self::new(prim.parse()?, preemptive))
    }
}

const fn row(
    id: u32,
    from: usize,
    to: usize,
    rate: RateSymbol,
    reset_loc: ResetMap,
    reset_app: ResetMap,
) -> Transition {
    Transition {
        id,
        from,
        to,
        rate,
        reset_app,
        reset_loc,
    }
}

use RateSymbol::{Lambda as L, LambdaHat as LH, Mu as M, MuHat as MH};
const ID: ResetMap = ResetMap::IDENTITY;
const FRESH: ResetMap = ResetMap::FRESH;
const DELIVER: ResetMap = ResetMap::DELIVER;

/// Columns: id, from, to, rate, location map, app map.
pub const RCU_TABLE: [Transition; 15] = [
    row(1, 0, 1, LH, FRESH, ID),
    row(2, 1, 1, LH, FRESH, ID),
    row(3, 2, 2, LH, FRESH, ID),
    row(4, 3, 2, LH, FRESH, ID),
    row(5, 4, 2, LH, FRESH, ID),
    row(6, 1, 0, MH, DELIVER, ID),
    row(7, 2, 4, MH, DELIVER, ID),
    row(8, 0, 3, L, ID, FRESH),
    row(9, 1, 2, L, ID, FRESH),
    row(10, 2, 2, L, ID, FRESH),
    row(11, 3, 3, L, ID, FRESH),
    row(12, 4, 4, L, ID, FRESH),
    row(13, 3, 0, M, ID, DELIVER),
    row(14, 4, 0, M, ID, ID),
    row(15, 2, 1, M, ID, ID),
];

pub const RWL_TABLE: [Transition; 14] = [
    row(1, 0, 1, LH, FRESH, ID),
    row(2, 1, 1, LH, FRESH, ID),
    row(3, 2, 2, LH, FRESH, ID),
    row(4, 3, 4, LH, FRESH, ID),
    row(5, 4, 4, LH, FRESH, ID),
    row(6, 1, 0, MH, DELIVER, ID),
    row(7, 2, 3, MH, DELIVER, ID),
    row(8, 0, 3, L, ID, FRESH),
    row(9, 1, 2, L, ID, FRESH),
    row(10, 2, 2, L, ID, FRESH),
    row(11, 3, 3, L, ID, FRESH),
    row(12, 4, 4, L, ID, FRESH),
    row(13, 3, 0, M, ID, DELIVER),
    row(14, 4, 1, M, ID, ID),
];

pub fn build_model(kind: PrimitiveKind) -> ShsModel {
    let table: &[Transition] = match kind.primitive {
        Primitive::Rcu => &RCU_TABLE,
        Primitive::Rwl => &RWL_TABLE,
    };
    let transitions = table
        .iter()
        .filter(|t| kind.preemptive || !READER_PREEMPTION_IDS.contains(&t.id))
        .copied()
        .collect();
    ShsModel {
        name: kind.to_string(),
        num_states: NUM_STATES,
        transitions,
    }
}

fn normalize(weights: [f64; NUM_STATES], kind: PrimitiveKind, params: &RateParams) -> StationaryDistribution {
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let residual = shs::global_balance_residual(&build_model(kind), params, &pi);
    StationaryDistribution { pi, residual }
}

/// Closed-form stationary distribution of the RCU chain.
///
/// Reader preemption only adds self-loops, so this holds for both variants.
pub fn rcu_stationary_closed_form(params: &RateParams) -> Result<StationaryDistribution> {
    params.require_positive()?;
    let (r, b, s) = (params.rho_hat(), params.beta(), params.sigma());
    let weights = [s, r * s, b * r, b * s / (r + s), b * r / (r + s)];
    Ok(normalize(weights, PrimitiveKind::RCU_P, params))
}

/// Closed-form stationary distribution of the RWL chain (either variant).
pub fn rwl_stationary_closed_form(params: &RateParams) -> Result<StationaryDistribution> {
    params.require_positive()?;
    let (r, b, s) = (params.rho_hat(), params.beta(), params.sigma());
    let weights = [
        s * (r + s + b * s),
        r * s * (b + r + s),
        b * r * s * (b + r + s),
        b * s * (1.0 + b + r),
        b * r * (1.0 + b + r),
    ];
    Ok(normalize(weights, PrimitiveKind::RWL_P, params))
}

pub fn stationary_closed_form(
    primitive: Primitive,
    params: &RateParams,
) -> Result<StationaryDistribution> {
    match primitive {
        Primitive::Rcu => rcu_stationary_closed_form(params),
        Primitive::Rwl => rwl_stationary_closed_form(params),
    }
}

/// Probability that an arriving app update is addressed correctly and
/// delivered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryProbability {
    pub kind: PrimitiveKind,
    pub value: f64,
}

/// Defined for the preemptive chains only.
pub fn delivery_probability(kind: PrimitiveKind, params: &RateParams) -> Result<DeliveryProbability> {
    if !kind.preemptive {
        return Err(Error::Unsupported(kind));
    }
    let pi = stationary_closed_form(kind.primitive, params)?.pi;
    let read_wins = params.mu / (params.lambda_star() + params.mu);
    let value = match kind.primitive {
        Primitive::Rcu => (pi[0] + pi[3]) * read_wins,
        Primitive::Rwl => {
            let write_wins = params.mu_hat / (params.mu_hat + params.lambda);
            (pi[0] + (pi[1] + pi[2]) * write_wins + pi[3]) * read_wins
        }
    };
    Ok(DeliveryProbability { kind, value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub kind: PrimitiveKind,
    pub params: RateParams,
    pub stationary: StationaryDistribution,
    /// Max |π_numeric − π_closed|.
    pub closed_form_deviation: f64,
    pub location: AgeBalanceSolution,
    pub app: AgeBalanceSolution,
    pub delivery: Option<f64>,
}

impl Analysis {
    /// `E[Δ̂]`, the average age of the location update in the FIB.
    pub fn age_location(&self) -> f64 {
        self.location.average_age
    }

    /// `E[Δ]`, the average age of app updates at the mobile terminal.
    pub fn age_app(&self) -> f64 {
        self.app.average_age
    }
}

pub fn analyze(kind: PrimitiveKind, params: &RateParams) -> Result<Analysis> {
    let model = build_model(kind);
    let stationary = shs::stationary_distribution(&model, params)?;
    let closed = stationary_closed_form(kind.primitive, params)?;
    let closed_form_deviation = stationary
        .pi
        .iter()
        .zip(&closed.pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let location = shs::solve_age_balance(&model, params, &stationary, AgeProcess::Location)?;
    let app = shs::solve_age_balance(&model, params, &stationary, AgeProcess::App)?;
    let delivery = kind
        .preemptive
        .then(|| delivery_probability(kind, params).map(|d| d.value))
        .transpose()?;
    Ok(Analysis {
        kind,
        params: *params,
        stationary,
        closed_form_deviation,
        location,
        app,
        delivery,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shs::validate_model;

    fn assert_row(
        t: &Transition,
        id: u32,
        from: usize,
        to: usize,
        rate: RateSymbol,
        loc: [[u8; 2]; 2],
        app: [[u8; 2]; 2],
    ) {
        assert_eq!(
            (t.id, t.from, t.to, t.rate, t.reset_loc.0, t.reset_app.0),
            (id, from, to, rate, loc, app),
            "row {id}"
        );
    }

    const I: [[u8; 2]; 2] = [[1, 0], [0, 1]];
    const Z: [[u8; 2]; 2] = [[0, 0], [0, 1]];
    const C: [[u8; 2]; 2] = [[1, 1], [0, 0]];

    #[test]
    fn rcu_rows() {
        let t = &RCU_TABLE;
        assert_row(&t[0], 1, 0, 1, LH, Z, I);
        assert_row(&t[1], 2, 1, 1, LH, Z, I);
        assert_row(&t[2], 3, 2, 2, LH, Z, I);
        assert_row(&t[3], 4, 3, 2, LH, Z, I);
        assert_row(&t[4], 5, 4, 2, LH, Z, I);
        assert_row(&t[5], 6, 1, 0, MH, C, I);
        assert_row(&t[6], 7, 2, 4, MH, C, I);
        assert_row(&t[7], 8, 0, 3, L, I, Z);
        assert_row(&t[8], 9, 1, 2, L, I, Z);
        assert_row(&t[9], 10, 2, 2, L, I, Z);
        assert_row(&t[10], 11, 3, 3, L, I, Z);
        assert_row(&t[11], 12, 4, 4, L, I, Z);
        assert_row(&t[12], 13, 3, 0, M, I, C);
        assert_row(&t[13], 14, 4, 0, M, I, I);
        assert_row(&t[14], 15, 2, 1, M, I, I);
    }

    #[test]
    fn rwl_rows() {
        let t = &RWL_TABLE;
        assert_row(&t[0], 1, 0, 1, LH, Z, I);
        assert_row(&t[1], 2, 1, 1, LH, Z, I);
        assert_row(&t[2], 3, 2, 2, LH, Z, I);
        assert_row(&t[3], 4, 3, 4, LH, Z, I);
        assert_row(&t[4], 5, 4, 4, LH, Z, I);
        assert_row(&t[5], 6, 1, 0, MH, C, I);
        assert_row(&t[6], 7, 2, 3, MH, C, I);
        assert_row(&t[7], 8, 0, 3, L, I, Z);
        assert_row(&t[8], 9, 1, 2, L, I, Z);
        assert_row(&t[9], 10, 2, 2, L, I, Z);
        assert_row(&t[10], 11, 3, 3, L, I, Z);
        assert_row(&t[11], 12, 4, 4, L, I, Z);
        assert_row(&t[12], 13, 3, 0, M, I, C);
        assert_row(&t[13], 14, 4, 1, M, I, I);
    }

    #[test]
    fn transition_counts() {
        let counts: Vec<usize> = PrimitiveKind::ALL
            .iter()
            .map(|&k| build_model(k).transitions.len())
            .collect();
        assert_eq!(counts, vec![15, 12, 14, 11]);
    }

    #[test]
    fn shipped_models_are_valid() {
        for kind in PrimitiveKind::ALL {
            let model = build_model(kind);
            assert!(validate_model(&model).is_empty(), "{kind}");
            for t in &model.transitions {
                assert!(t.reset_app.is_identity() || t.reset_loc.is_identity());
            }
        }
    }

    #[test]
    fn rcu_exclusive_transition() {
        let rcu = build_model(PrimitiveKind::RCU_P);
        let t = rcu.transition(15).unwrap();
        assert_eq!((t.from, t.to, t.rate), (2, 1, RateSymbol::Mu));
        assert!(t.reset_app.is_identity() && t.reset_loc.is_identity());
        let rwl = build_model(PrimitiveKind::RWL_P);
        assert!(rwl.transition(15).is_none());
        let t = rwl.transition(14).unwrap();
        assert_eq!((t.from, t.to, t.rate), (4, 1, RateSymbol::Mu));
    }

    #[test]
    fn non_preemptive_has_no_lambda_self_loops() {
        for kind in [PrimitiveKind::RCU_NP, PrimitiveKind::RWL_NP] {
            let model = build_model(kind);
            assert!(!model
                .transitions
                .iter()
                .any(|t| t.is_self_loop() && t.rate == RateSymbol::Lambda));
        }
    }

    #[test]
    fn kind_parsing() {
        for kind in PrimitiveKind::ALL {
            assert_eq!(kind.to_string().parse::<PrimitiveKind>().unwrap(), kind);
        }
        assert_eq!("RWL".parse::<PrimitiveKind>().unwrap(), PrimitiveKind::RWL_P);
        assert!("rcu-x".parse::<PrimitiveKind>().is_err());
    }

    #[test]
    fn rcu_closed_form_unit_rates() {
        let p = RateParams::normalized(1.0, 1.0, 1.0).unwrap();
        let pi = rcu_stationary_closed_form(&p).unwrap().pi;
        for (a, b) in pi.iter().zip([0.25, 0.25, 0.25, 0.125, 0.125]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rcu_closed_form_fast_reads() {
        let p = RateParams::normalized(0.1, 1.0, 10.0).unwrap();
        let pi = rcu_stationary_closed_form(&p).unwrap().pi;
        let expected = [10.0, 1.0, 0.1, 10.0 / 10.1, 0.1 / 10.1].map(|w| w / 12.1);
        for (a, b) in pi.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in pi.iter().zip([0.82645, 0.08264, 0.00826, 0.08182, 0.00082]) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn rwl_closed_form_unit_rates() {
        let p = RateParams::normalized(1.0, 1.0, 1.0).unwrap();
        let pi = rwl_stationary_closed_form(&p).unwrap().pi;
        for a in pi {
            assert!((a - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn rwl_without_readers_is_writer_cycle() {
        let p = RateParams::normalized(1.0, 1e-6, 1.0).unwrap();
        let pi = rwl_stationary_closed_form(&p).unwrap().pi;
        assert!(pi[2] + pi[3] + pi[4] < 1e-5);
        assert!((pi[1] / pi[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn closed_forms_match_numeric() {
        for (r, b, s) in [(0.01, 0.3, 0.7), (0.1, 10.0, 1.0), (2.0, 5.0, 20.0)] {
            let p = RateParams::normalized(r, b, s).unwrap();
            for kind in [PrimitiveKind::RCU_P, PrimitiveKind::RWL_P] {
                let numeric = shs::stationary_distribution(&build_model(kind), &p).unwrap();
                let closed = stationary_closed_form(kind.primitive, &p).unwrap();
                for (a, c) in numeric.pi.iter().zip(&closed.pi) {
                    assert!((a - c).abs() < 1e-10, "{kind} {r} {b} {s}");
                }
                assert!(closed.residual < 1e-10);
            }
        }
    }

    #[test]
    fn closed_form_rejects_zero_rates() {
        let p = RateParams::normalized(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            rcu_stationary_closed_form(&p),
            Err(Error::NonErgodic(_))
        ));
        assert!(matches!(
            rwl_stationary_closed_form(&p),
            Err(Error::NonErgodic(_))
        ));
    }

    #[test]
    fn delivery_spot_values() {
        let p = RateParams::normalized(1.0, 1.0, 1.0).unwrap();
        let rcu = delivery_probability(PrimitiveKind::RCU_P, &p).unwrap().value;
        let rwl = delivery_probability(PrimitiveKind::RWL_P, &p).unwrap().value;
        assert!((rcu - 0.125).abs() < 1e-15);
        assert!((rwl - 0.2).abs() < 1e-15);
    }

    #[test]
    fn delivery_without_mobility() {
        let p = RateParams::normalized(1e-12, 1.0, 1.0).unwrap();
        for kind in [PrimitiveKind::RCU_P, PrimitiveKind::RWL_P] {
            let d = delivery_probability(kind, &p).unwrap().value;
            assert!((d - 0.5).abs() < 1e-9, "{kind}: {d}");
        }
    }

    #[test]
    fn delivery_unsupported_without_preemption() {
        let p = RateParams::normalized(0.1, 1.0, 1.0).unwrap();
        assert_eq!(
            delivery_probability(PrimitiveKind::RWL_NP, &p),
            Err(Error::Unsupported(PrimitiveKind::RWL_NP))
        );
    }

    #[test]
    fn rcu_location_age_near_inverse_load() {
        for kind in [PrimitiveKind::RCU_P, PrimitiveKind::RCU_NP] {
            for r in [0.01, 0.05, 0.1] {
                let p = RateParams::normalized(r, 10.0, 10.0).unwrap();
                let a = analyze(kind, &p).unwrap();
                let scaled = a.age_location() * r;
                assert!((0.9..=1.1 + 1e-9).contains(&scaled), "{kind} {r}: {scaled}");
            }
        }
    }

    #[test]
    fn rcu_location_age_is_writer_only() {
        // Reads never block RCU writes, so the FIB age is that of a
        // preemptive single-server queue: 1/λ̂ + 1/μ̂.
        for (r, b, s) in [(0.01, 1.0, 10.0), (0.3, 20.0, 0.5)] {
            let p = RateParams::normalized(r, b, s).unwrap();
            let a = analyze(PrimitiveKind::RCU_P, &p).unwrap();
            assert!((a.age_location() - (1.0 / r + 1.0)).abs() < 1e-9 * (1.0 / r));
        }
    }

    #[test]
    fn table_export_is_stable() {
        let text = build_model(PrimitiveKind::RWL_NP).to_table();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# model rwl-np states 5");
        assert_eq!(lines[2], "1 0 1 lambda_hat 0 0 0 1 1 0 0 1");
        assert_eq!(lines[7], "6 1 0 mu_hat 1 1 0 0 1 0 0 1");
        assert_eq!(lines.last().unwrap(), &"14 4 1 mu 1 0 0 1 1 0 0 1");
        assert_eq!(lines.len(), 2 + 11);
        assert_eq!(
            ShsModel::from_table(&text).unwrap(),
            build_model(PrimitiveKind::RWL_NP)
        );
    }
}
