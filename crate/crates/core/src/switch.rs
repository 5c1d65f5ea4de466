//! Series/parallel switch networks and the gates built from them.
//!
//! A gate output hangs between a pull-up network (conducting drives it
//! high) and a pull-down network (conducting drives it low). A network is
//! a tree: leaves are plain or negated variables, series composition
//! conducts when all children conduct, parallel composition when any child
//! does. An empty series is a closed wire (always conducts), an empty
//! parallel never conducts; the two serve as constants.
//!
//! Gates where the two networks are opposite on every assignment compute a
//! boolean function. Gates where both can be off at once leave the output
//! floating, which holds its previous level: a memory. Both networks
//! conducting at once is a short and is rejected, never classified.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::TraceError;
use crate::trace::Symbol;

/// Largest input count `check_no_short` and `classify_gate` accept; both
/// enumerate all 2^k assignments.
pub const EXHAUSTIVE_INPUT_LIMIT: usize = 20;

/// A series/parallel transistor network, evaluated as path existence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SwitchNetwork {
    Series {
        series: Vec<SwitchNetwork>,
    },
    Parallel {
        parallel: Vec<SwitchNetwork>,
    },
    Literal {
        var: Symbol,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        negated: bool,
    },
}

impl SwitchNetwork {
    pub fn literal(var: Symbol) -> Self {
        SwitchNetwork::Literal {
            var,
            negated: false,
        }
    }

    pub fn negated(var: Symbol) -> Self {
        SwitchNetwork::Literal { var, negated: true }
    }

    pub fn series(children: Vec<SwitchNetwork>) -> Self {
        SwitchNetwork::Series { series: children }
    }

    pub fn parallel(children: Vec<SwitchNetwork>) -> Self {
        SwitchNetwork::Parallel { parallel: children }
    }

    /// A closed wire: conducts under every assignment.
    pub fn always_on() -> Self {
        SwitchNetwork::series(Vec::new())
    }

    /// An open circuit: conducts under no assignment.
    pub fn always_off() -> Self {
        SwitchNetwork::parallel(Vec::new())
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        let mut vars = BTreeSet::new();
        self.collect_variables(&mut vars);
        vars
    }

    fn collect_variables(&self, into: &mut BTreeSet<Symbol>) {
        match self {
            SwitchNetwork::Literal { var, .. } => {
                into.insert(var.clone());
            }
            SwitchNetwork::Series { series: children }
            | SwitchNetwork::Parallel { parallel: children } => {
                for c in children {
                    c.collect_variables(into);
                }
            }
        }
    }

    /// True iff a conducting path exists under `assignment`, which must
    /// give a value to every variable in the tree.
    pub fn eval(&self, assignment: &BTreeMap<Symbol, bool>) -> Result<bool, TraceError> {
        match self {
            SwitchNetwork::Literal { var, negated } => match assignment.get(var) {
                Some(v) => Ok(v ^ negated),
                None => Err(TraceError::MissingVariable(var.as_str().to_string())),
            },
            SwitchNetwork::Series { series } => {
                for c in series {
                    if !c.eval(assignment)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            SwitchNetwork::Parallel { parallel } => {
                for c in parallel {
                    if c.eval(assignment)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}

#[derive(Deserialize)]
struct GateRepr {
    inputs: Vec<Symbol>,
    pull_up: SwitchNetwork,
    pull_down: SwitchNetwork,
}

/// An output driven high by `pull_up` and low by `pull_down`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GateRepr")]
pub struct Gate {
    inputs: Vec<Symbol>,
    pull_up: SwitchNetwork,
    pull_down: SwitchNetwork,
}

impl TryFrom<GateRepr> for Gate {
    type Error = TraceError;

    fn try_from(repr: GateRepr) -> Result<Self, TraceError> {
        Gate::new(repr.inputs, repr.pull_up, repr.pull_down)
    }
}

impl Gate {
    /// Input names must be distinct and cover every variable used in
    /// either network.
    pub fn new(
        inputs: Vec<Symbol>,
        pull_up: SwitchNetwork,
        pull_down: SwitchNetwork,
    ) -> Result<Self, TraceError> {
        let mut seen = BTreeSet::new();
        for i in &inputs {
            if !seen.insert(i.clone()) {
                return Err(TraceError::InvalidGate(format!(
                    "duplicate input {:?}",
                    i.as_str()
                )));
            }
        }
        let mut used = pull_up.variables();
        used.extend(pull_down.variables());
        for v in used {
            if !seen.contains(&v) {
                return Err(TraceError::InvalidGate(format!(
                    "variable {:?} is not a declared input",
                    v.as_str()
                )));
            }
        }
        Ok(Gate {
            inputs,
            pull_up,
            pull_down,
        })
    }

    pub fn inputs(&self) -> &[Symbol] {
        &self.inputs
    }

    pub fn pull_up(&self) -> &SwitchNetwork {
        &self.pull_up
    }

    pub fn pull_down(&self) -> &SwitchNetwork {
        &self.pull_down
    }

    /// All assignments in counting order, first input as the low bit.
    fn assignments(&self) -> Result<impl Iterator<Item = BTreeMap<Symbol, bool>> + '_, TraceError> {
        let k = self.inputs.len();
        if k > EXHAUSTIVE_INPUT_LIMIT {
            return Err(TraceError::TooManyInputs {
                count: k,
                limit: EXHAUSTIVE_INPUT_LIMIT,
            });
        }
        Ok((0u32..1 << k).map(move |bits| {
            self.inputs
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), bits >> i & 1 == 1))
                .collect()
        }))
    }
}

/// Result of the exhaustive short-circuit scan.
#[derive(Debug, Clone, Serialize)]
pub struct ShortReport {
    pub holds: bool,
    /// Assignments under which both networks conduct.
    pub violations: Vec<BTreeMap<Symbol, bool>>,
}

/// Checks that the two networks never conduct simultaneously, trying all
/// 2^k assignments.
pub fn check_no_short(g: &Gate) -> Result<ShortReport, TraceError> {
    let mut violations = Vec::new();
    for a in g.assignments()? {
        if g.pull_up.eval(&a)? && g.pull_down.eval(&a)? {
            violations.push(a);
        }
    }
    Ok(ShortReport {
        holds: violations.is_empty(),
        violations,
    })
}

/// How a well-formed gate behaves, or the shorting assignments if it is
/// not well formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateVerdict {
    /// The networks are opposite everywhere: the output is a boolean
    /// function of the inputs (the pull-up condition).
    Combinational,
    /// Some assignment leaves both networks off: the floating output
    /// memorizes its previous level.
    StateHolding,
    Short {
        violations: Vec<BTreeMap<Symbol, bool>>,
    },
}

/// Classifies a gate as combinational or state holding; a gate that ever
/// shorts is rejected instead of classified.
pub fn classify_gate(g: &Gate) -> Result<GateVerdict, TraceError> {
    let short = check_no_short(g)?;
    if !short.holds {
        return Ok(GateVerdict::Short {
            violations: short.violations,
        });
    }
    for a in g.assignments()? {
        if !g.pull_up.eval(&a)? && !g.pull_down.eval(&a)? {
            return Ok(GateVerdict::StateHolding);
        }
    }
    Ok(GateVerdict::Combinational)
}

/// One latch step: with the enable high the output copies the data input,
/// with it low the previous output is kept.
pub fn latch_next(x: bool, e: bool, z_before: bool) -> bool {
    (x && e) || (z_before && !e)
}

/// Two-input nand: pull-up conducts unless both inputs are high.
pub fn nand() -> Gate {
    let x1 = Symbol::new("x1").unwrap();
    let x2 = Symbol::new("x2").unwrap();
    Gate::new(
        vec![x1.clone(), x2.clone()],
        SwitchNetwork::parallel(vec![
            SwitchNetwork::negated(x1.clone()),
            SwitchNetwork::negated(x2.clone()),
        ]),
        SwitchNetwork::series(vec![
            SwitchNetwork::literal(x1),
            SwitchNetwork::literal(x2),
        ]),
    )
    .unwrap()
}

/// Pass latch: drives the data value while the enable is high, floats
/// while it is low.
pub fn latch() -> Gate {
    let x = Symbol::new("x").unwrap();
    let e = Symbol::new("e").unwrap();
    Gate::new(
        vec![x.clone(), e.clone()],
        SwitchNetwork::series(vec![
            SwitchNetwork::literal(x.clone()),
            SwitchNetwork::literal(e.clone()),
        ]),
        SwitchNetwork::series(vec![
            SwitchNetwork::negated(x),
            SwitchNetwork::literal(e),
        ]),
    )
    .unwrap()
}
