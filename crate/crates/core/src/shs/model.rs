use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ResetMap;

/// Which of the four forwarder rates drives a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSymbol {
    /// Location-update arrivals.
    LambdaHat,
    /// App-update arrivals.
    Lambda,
    /// Write completions.
    MuHat,
    /// Read completions.
    Mu,
}

impl RateSymbol {
    pub const ALL: [RateSymbol; 4] = [
        RateSymbol::LambdaHat,
        RateSymbol::Lambda,
        RateSymbol::MuHat,
        RateSymbol::Mu,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RateSymbol::LambdaHat => "lambda_hat",
            RateSymbol::Lambda => "lambda",
            RateSymbol::MuHat => "mu_hat",
            RateSymbol::Mu => "mu",
        }
    }
}

impl fmt::Display for RateSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateSymbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RateSymbol::ALL
            .into_iter()
            .find(|sym| sym.as_str() == s)
            .ok_or_else(|| format!("unknown rate symbol {s:?}"))
    }
}

/// The two coupled age processes tracked at the forwarder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeProcess {
    /// `(x̂0, x̂1)`: location update at the writer and in the FIB.
    Location,
    /// `(x0, x1)`: app update at the reader and at the mobile terminal.
    App,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: u32,
    pub from: usize,
    pub to: usize,
    pub rate: RateSymbol,
    pub reset_app: ResetMap,
    pub reset_loc: ResetMap,
}

impl Transition {
    pub fn reset(&self, process: AgeProcess) -> &ResetMap {
        match process {
            AgeProcess::Location => &self.reset_loc,
            AgeProcess::App => &self.reset_app,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.from == self.to
    }
}

/// A finite-state SHS: a CTMC on `num_states` states whose transitions carry
/// one reset map per age process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShsModel {
    pub name: String,
    pub num_states: usize,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    StateOutOfRange { id: u32, state: usize },
    NonBinaryReset { id: u32, process: AgeProcess },
    NoIdentityReset { id: u32 },
    DuplicateId { id: u32 },
    /// States not reachable from state 0, or that cannot reach state 0.
    NotStronglyConnected { unreachable: Vec<usize>, trapped: Vec<usize> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::StateOutOfRange { id, state } => {
                write!(f, "transition {id}: state {state} out of range")
            }
            Diagnostic::NonBinaryReset { id, process } => {
                write!(f, "transition {id}: {process:?} reset map is not binary")
            }
            Diagnostic::NoIdentityReset { id } => write!(
                f,
                "transition {id}: neither reset map is the identity"
            ),
            Diagnostic::DuplicateId { id } => write!(f, "duplicate transition id {id}"),
            Diagnostic::NotStronglyConnected { unreachable, trapped } => write!(
                f,
                "chain is not strongly connected (unreachable from 0: {unreachable:?}, cannot return to 0: {trapped:?})"
            ),
        }
    }
}

impl ShsModel {
    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    pub fn incoming(&self, state: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.to == state)
    }

    pub fn transition(&self, id: u32) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    /// Plain-text table, one transition per line:
    /// `id from to rate` followed by the location map bits and the app map
    /// bits, each row-major.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# model {} states {}\n# id from to rate loc00 loc01 loc10 loc11 app00 app01 app10 app11\n",
            self.name, self.num_states
        );
        for t in &self.transitions {
            let [l0, l1, l2, l3] = t.reset_loc.bits();
            let [a0, a1, a2, a3] = t.reset_app.bits();
            out.push_str(&format!(
                "{} {} {} {} {l0} {l1} {l2} {l3} {a0} {a1} {a2} {a3}\n",
                t.id, t.from, t.to, t.rate
            ));
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty table")?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let (name, num_states) = match head.as_slice() {
            ["#", "model", name, "states", n] => (
                name.to_string(),
                n.parse::<usize>().map_err(|e| format!("bad state count: {e}"))?,
            ),
            _ => return Err(format!("bad header {header:?}")),
        };
        let mut transitions = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 12 {
                return Err(format!("expected 12 fields, got {}: {line:?}", fields.len()));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
            let bit = |s: &str| s.parse::<u8>().map_err(|e| format!("{s:?}: {e}"));
            let mut bits = [0u8; 8];
            for (b, s) in bits.iter_mut().zip(&fields[4..]) {
                *b = bit(s)?;
            }
            transitions.push(Transition {
                id: fields[0].parse().map_err(|e| format!("bad id: {e}"))?,
                from: num(fields[1])?,
                to: num(fields[2])?,
                rate: fields[3].parse()?,
                reset_loc: ResetMap([[bits[0], bits[1]], [bits[2], bits[3]]]),
                reset_app: ResetMap([[bits[4], bits[5]], [bits[6], bits[7]]]),
            });
        }
        Ok(Self {
            name,
            num_states,
            transitions,
        })
    }

    /// States reachable from `start` along non-self-loop edges, forwards or
    /// backwards.
    fn reachable(&self, start: usize, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.num_states];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(s) = queue.pop_front() {
            for t in &self.transitions {
                if t.is_self_loop() || t.from >= self.num_states || t.to >= self.num_states {
                    continue;
                }
                let (src, dst) = if reverse { (t.to, t.from) } else { (t.from, t.to) };
                if src == s && !seen[dst] {
                    seen[dst] = true;
                    queue.push_back(dst);
                }
            }
        }
        seen
    }

    pub(crate) fn connectivity(&self) -> Option<Diagnostic> {
        if self.num_states == 0 {
            return Some(Diagnostic::NotStronglyConnected {
                unreachable: vec![],
                trapped: vec![],
            });
        }
        let missing = |seen: Vec<bool>| -> Vec<usize> {
            seen.iter()
                .enumerate()
                .filter(|(_, &s)| !s)
                .map(|(i, _)| i)
                .collect()
        };
        let unreachable = missing(self.reachable(0, false));
        let trapped = missing(self.reachable(0, true));
        if unreachable.is_empty() && trapped.is_empty() {
            None
        } else {
            Some(Diagnostic::NotStronglyConnected { unreachable, trapped })
        }
    }
}

/// Checks the structural invariants of a model. An empty list means the
/// model is valid.
pub fn validate_model(model: &ShsModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut ids = HashSet::new();
    for t in &model.transitions {
        if !ids.insert(t.id) {
            diags.push(Diagnostic::DuplicateId { id: t.id });
        }
        for state in [t.from, t.to] {
            if state >= model.num_states {
                diags.push(Diagnostic::StateOutOfRange { id: t.id, state });
            }
        }
        for process in [AgeProcess::Location, AgeProcess::App] {
            if !t.reset(process).is_binary() {
                diags.push(Diagnostic::NonBinaryReset { id: t.id, process });
            }
        }
        // At most one age process changes per transition. Lost reads touch
        // neither, so two identities are allowed.
        if !t.reset_app.is_identity() && !t.reset_loc.is_identity() {
            diags.push(Diagnostic::NoIdentityReset { id: t.id });
        }
    }
    diags.extend(model.connectivity());
    diags
}
