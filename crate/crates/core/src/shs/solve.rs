use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AgeProcess, ShsModel};
use crate::error::{Error, Result};
use crate::params::RateParams;

pub const BALANCE_TOLERANCE: f64 = 1e-10;
pub const NEGATIVITY_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    /// Largest absolute global-balance violation.
    pub residual: f64,
}

/// Fixed points `v̄_q = (v̄_q0, v̄_q1)` of one age process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeBalanceSolution {
    pub process: AgeProcess,
    pub v_bar: Vec<[f64; 2]>,
    pub average_age: f64,
    /// Largest absolute age-balance violation.
    pub residual: f64,
}

fn check_ergodic(model: &ShsModel, params: &RateParams) -> Result<()> {
    params.require_positive()?;
    if let Some(diag) = model.connectivity() {
        return Err(Error::NonErgodic(format!("{}: {diag}", model.name)));
    }
    for t in &model.transitions {
        if t.from >= model.num_states || t.to >= model.num_states {
            return Err(Error::NonErgodic(format!(
                "{}: transition {} leaves the state space",
                model.name, t.id
            )));
        }
    }
    Ok(())
}

fn lu_solve(matrix: DMatrix<f64>, rhs: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let solution = matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem(what.to_string()))?;
    if solution.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem(format!("{what}: non-finite solution")));
    }
    Ok(solution)
}

/// Max over states of |outflow·π_q − Σ incoming rate·π_source|, self-loops
/// excluded on both sides.
pub fn global_balance_residual(model: &ShsModel, params: &RateParams, pi: &[f64]) -> f64 {
    let mut net = vec![0.0; model.num_states];
    for t in model.transitions.iter().filter(|t| !t.is_self_loop()) {
        let flow = params.rate(t.rate) * pi[t.from];
        net[t.from] -= flow;
        net[t.to] += flow;
    }
    net.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Stationary distribution of the discrete-state chain, from a dense solve of
/// the global balance equations with one equation replaced by normalization.
pub fn stationary_distribution(
    model: &ShsModel,
    params: &RateParams,
) -> Result<StationaryDistribution> {
    check_ergodic(model, params)?;
    let n = model.num_states;
    // Row q of the transposed generator: inflow into q minus outflow of q.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for t in model.transitions.iter().filter(|t| !t.is_self_loop()) {
        let rate = params.rate(t.rate);
        a[(t.to, t.from)] += rate;
        a[(t.from, t.from)] -= rate;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = lu_solve(a, b, "global balance")?;

    if let Some((q, &p)) = x.iter().enumerate().find(|(_, &p)| p < -1e-12) {
        return Err(Error::NonErgodic(format!(
            "{}: stationary probability of state {q} is {p:e}",
            model.name
        )));
    }
    let mut pi: Vec<f64> = x.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let residual = global_balance_residual(model, params, &pi);
    Ok(StationaryDistribution { pi, residual })
}

/// Max absolute violation of the age-balance equations by `v_bar`:
/// `v̄_q · Σ_{out} rate = π_q·1 + Σ_{in} rate · v̄_{from} · A`.
pub fn age_balance_residual(
    model: &ShsModel,
    params: &RateParams,
    pi: &[f64],
    process: AgeProcess,
    v_bar: &[[f64; 2]],
) -> f64 {
    let mut lhs: Vec<[f64; 2]> = vec![[0.0; 2]; model.num_states];
    let mut rhs: Vec<[f64; 2]> = pi.iter().map(|&p| [p, p]).collect();
    for t in &model.transitions {
        let rate = params.rate(t.rate);
        for k in 0..2 {
            lhs[t.from][k] += rate * v_bar[t.from][k];
        }
        let reset = t.reset(process).apply(v_bar[t.from]);
        for k in 0..2 {
            rhs[t.to][k] += rate * reset[k];
        }
    }
    lhs.iter()
        .zip(&rhs)
        .flat_map(|(l, r)| [(l[0] - r[0]).abs(), (l[1] - r[1]).abs()])
        .fold(0.0, f64::max)
}

/// Solves the age-balance equations of one age process as a single dense
/// system in `2 · num_states` unknowns.
///
/// Each state's fixed point is multiplied by its total outgoing rate, with
/// self-loops counted both as outflow and as reset inflow.
pub fn solve_age_balance(
    model: &ShsModel,
    params: &RateParams,
    stationary: &StationaryDistribution,
    process: AgeProcess,
) -> Result<AgeBalanceSolution> {
    check_ergodic(model, params)?;
    let n = model.num_states;
    if stationary.pi.len() != n {
        return Err(Error::SingularSystem(format!(
            "stationary distribution has {} entries for {n} states",
            stationary.pi.len()
        )));
    }
    let idx = |state: usize, component: usize| 2 * state + component;
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut b = DVector::<f64>::zeros(2 * n);
    for (q, &p) in stationary.pi.iter().enumerate() {
        b[idx(q, 0)] = p;
        b[idx(q, 1)] = p;
    }
    for t in &model.transitions {
        let rate = params.rate(t.rate);
        let reset = t.reset(process);
        for k in 0..2 {
            a[(idx(t.from, k), idx(t.from, k))] += rate;
            for i in 0..2 {
                a[(idx(t.to, k), idx(t.from, i))] -= rate * reset.entry(i, k);
            }
        }
    }
    let x = lu_solve(a, b, "age balance")?;

    let mut v_bar = Vec::with_capacity(n);
    for q in 0..n {
        let mut v = [x[idx(q, 0)], x[idx(q, 1)]];
        for (component, value) in v.iter_mut().enumerate() {
            if *value < NEGATIVITY_TOLERANCE {
                return Err(Error::NegativeFixedPoint {
                    state: q,
                    component,
                    value: *value,
                });
            }
            *value = value.max(0.0);
        }
        v_bar.push(v);
    }
    let residual = age_balance_residual(model, params, &stationary.pi, process, &v_bar);
    let average_age = v_bar.iter().map(|v| v[1]).sum();
    Ok(AgeBalanceSolution {
        process,
        v_bar,
        average_age,
        residual,
    })
}

/// Average age of the monitored (second) component: `Σ_q v̄_q1`.
pub fn average_age(solution: &AgeBalanceSolution) -> f64 {
    solution.v_bar.iter().map(|v| v[1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shs::{validate_model, RateSymbol, ResetMap, Transition};

    fn transition(id: u32, from: usize, to: usize, rate: RateSymbol, app: ResetMap) -> Transition {
        Transition {
            id,
            from,
            to,
            rate,
            reset_app: app,
            reset_loc: ResetMap::IDENTITY,
        }
    }

    /// Single source, preemptive single server: idle (0) and busy (1).
    pub(crate) fn preemptive_server() -> ShsModel {
        ShsModel {
            name: "mm11-preemptive".into(),
            num_states: 2,
            transitions: vec![
                transition(1, 0, 1, RateSymbol::Lambda, ResetMap::FRESH),
                transition(2, 1, 1, RateSymbol::Lambda, ResetMap::FRESH),
                transition(3, 1, 0, RateSymbol::Mu, ResetMap::DELIVER),
            ],
        }
    }

    fn birth_death() -> ShsModel {
        ShsModel {
            name: "birth-death".into(),
            num_states: 2,
            transitions: vec![
                transition(1, 0, 1, RateSymbol::Lambda, ResetMap::IDENTITY),
                transition(2, 1, 0, RateSymbol::Mu, ResetMap::IDENTITY),
            ],
        }
    }

    #[test]
    fn birth_death_stationary() {
        // 0 -> 1 at a = 2, 1 -> 0 at b = 3.
        let params = RateParams::new(1.0, 2.0, 1.0, 3.0).unwrap();
        let pi = stationary_distribution(&birth_death(), &params).unwrap();
        assert!((pi.pi[0] - 0.6).abs() < 1e-14);
        assert!((pi.pi[1] - 0.4).abs() < 1e-14);
        assert!(pi.residual < BALANCE_TOLERANCE);
    }

    #[test]
    fn preemptive_server_age() {
        let model = preemptive_server();
        assert!(validate_model(&model).is_empty());
        let params = RateParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let pi = stationary_distribution(&model, &params).unwrap();
        let sol = solve_age_balance(&model, &params, &pi, AgeProcess::App).unwrap();
        assert!((sol.average_age - 2.0).abs() < 1e-12);
        assert!(sol.residual < BALANCE_TOLERANCE);
    }

    #[test]
    fn preemptive_server_age_matches_reciprocal_sum() {
        let model = preemptive_server();
        for (lambda, mu) in [(0.5, 2.0), (3.0, 0.25), (7.0, 7.0)] {
            let params = RateParams::new(1.0, lambda, 1.0, mu).unwrap();
            let pi = stationary_distribution(&model, &params).unwrap();
            let sol = solve_age_balance(&model, &params, &pi, AgeProcess::App).unwrap();
            let expected = 1.0 / lambda + 1.0 / mu;
            assert!((sol.average_age - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn average_age_sums_second_components() {
        let sol = AgeBalanceSolution {
            process: AgeProcess::App,
            v_bar: (1..=5).map(|k| [0.0, k as f64]).collect(),
            average_age: 0.0,
            residual: 0.0,
        };
        assert_eq!(average_age(&sol), 15.0);
        let single = AgeBalanceSolution {
            process: AgeProcess::Location,
            v_bar: vec![[0.5, 2.5]],
            average_age: 0.0,
            residual: 0.0,
        };
        assert_eq!(average_age(&single), 2.5);
    }

    #[test]
    fn zero_rate_is_rejected() {
        let params = RateParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            stationary_distribution(&birth_death(), &params),
            Err(Error::NonErgodic(_))
        ));
    }

    #[test]
    fn disconnected_chain_is_rejected() {
        let mut model = birth_death();
        model.transitions.pop();
        let params = RateParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            stationary_distribution(&model, &params),
            Err(Error::NonErgodic(_))
        ));
    }

    #[test]
    fn growth_without_reset_is_singular() {
        // The app age is never reset, so its fixed point does not exist.
        let model = birth_death();
        let params = RateParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let pi = stationary_distribution(&model, &params).unwrap();
        assert!(matches!(
            solve_age_balance(&model, &params, &pi, AgeProcess::App),
            Err(Error::SingularSystem(_))
        ));
    }
}
