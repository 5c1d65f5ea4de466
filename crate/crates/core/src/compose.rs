//! Decomposition checking for networks of trace structures.
//!
//! A decomposition names a target structure and a list of parts that are
//! supposed to implement it. The network is closed by reflecting the target
//! (the environment plays the target's mirror image) and weaving it with
//! every part. Component index 0 always refers to that reflected target;
//! indices 1 and up refer to the parts in order.
//!
//! `check_decomposition` evaluates four conditions:
//!
//! 1. closed: every symbol produced somewhere is consumed somewhere and
//!    vice versa (union of outputs equals union of inputs),
//! 2. no output interference: no two components drive the same symbol,
//! 3. no computation interference: on every reachable joint state, an
//!    output one component is ready to produce is acceptable to every
//!    component that listens to it,
//! 4. boundary: the closed network, projected on the target's alphabet,
//!    has exactly the target's trace set.
//!
//! The report carries a machine-checkable witness for each failed
//! condition. Inputs read by more than one component are reported as
//! shared; in strict mode they fail the check, forcing fan-out to be
//! expressed through explicit fork parts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::automaton::RegularTraceSet;
use crate::error::TraceError;
use crate::trace::{Symbol, Trace, TraceStructure};

/// A target structure together with the parts meant to implement it.
#[derive(Debug, Clone)]
pub struct Decomposition {
    target: TraceStructure,
    parts: Vec<(String, TraceStructure)>,
}

impl Decomposition {
    /// Both the target and every part must be a valid circuit
    /// specification; at least one part is required and part names must be
    /// distinct.
    pub fn new(
        target: TraceStructure,
        parts: Vec<(String, TraceStructure)>,
    ) -> Result<Self, TraceError> {
        target.validate_circuit_spec()?;
        if parts.is_empty() {
            return Err(TraceError::InvalidDecomposition(
                "at least one part is required".into(),
            ));
        }
        let mut names = BTreeSet::new();
        for (name, part) in &parts {
            part.validate_circuit_spec()?;
            if !names.insert(name.clone()) {
                return Err(TraceError::InvalidDecomposition(format!(
                    "duplicate part name {name:?}"
                )));
            }
        }
        Ok(Decomposition { target, parts })
    }

    pub fn target(&self) -> &TraceStructure {
        &self.target
    }

    pub fn parts(&self) -> &[(String, TraceStructure)] {
        &self.parts
    }

    /// The components of the closed network: the reflected target at index
    /// 0 followed by the parts.
    pub fn components(&self) -> Vec<TraceStructure> {
        let mut v = Vec::with_capacity(self.parts.len() + 1);
        v.push(self.target.reflect());
        v.extend(self.parts.iter().map(|(_, p)| p.clone()));
        v
    }

    /// Name of the component at `index`, for diagnostics.
    pub fn component_name(&self, index: usize) -> String {
        if index == 0 {
            "environment".into()
        } else {
            self.parts[index - 1].0.clone()
        }
    }
}

/// Weave of the reflected target with every part.
pub fn close_network(d: &Decomposition) -> TraceStructure {
    let mut t = d.target.reflect();
    for (_, part) in &d.parts {
        t = t.weave(part);
    }
    t
}

/// Verdict for the closed-network condition.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedVerdict {
    pub holds: bool,
    /// Symbols consumed by some component but produced by none.
    pub missing_producer: Vec<Symbol>,
    /// Symbols produced by some component but consumed by none.
    pub missing_consumer: Vec<Symbol>,
}

/// Two components driving the same symbol.
#[derive(Debug, Clone, Serialize)]
pub struct OutputClash {
    pub symbol: Symbol,
    pub components: [usize; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputVerdict {
    pub holds: bool,
    pub clashes: Vec<OutputClash>,
}

/// A reachable joint state (reached by `trace`) where component `producer`
/// is ready to emit `symbol` but component `blocked` cannot accept it.
#[derive(Debug, Clone, Serialize)]
pub struct InterferenceWitness {
    pub trace: Trace,
    pub symbol: Symbol,
    pub producer: usize,
    pub blocked: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComputationVerdict {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<InterferenceWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryVerdict {
    pub holds: bool,
    /// Shortest trace over the target alphabet on which the projected
    /// network and the target disagree.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distinguishing: Option<Trace>,
}

/// An input consumed by two or more components.
#[derive(Debug, Clone, Serialize)]
pub struct SharedInput {
    pub symbol: Symbol,
    pub readers: Vec<usize>,
}

/// Outcome of `check_decomposition`. Component indices follow
/// `Decomposition::components`: 0 is the reflected target.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub closed: ClosedVerdict,
    pub output_interference: OutputVerdict,
    pub computation_interference: ComputationVerdict,
    pub boundary: BoundaryVerdict,
    pub shared_inputs: Vec<SharedInput>,
    pub strict: bool,
    /// First condition that failed, in the order closed, output
    /// interference, computation interference, boundary, shared inputs
    /// (strict mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    pub holds: bool,
}

/// Checks the four decomposition conditions. With `strict` set, inputs
/// read by more than one component also fail the check.
pub fn check_decomposition(d: &Decomposition, strict: bool) -> DecompositionReport {
    let components = d.components();

    let closed = check_closed(&components);
    let output_interference = check_outputs(&components);
    let computation_interference = check_computation(&components);
    let boundary = check_boundary(d, &components);
    let shared_inputs = shared_inputs(&components);

    let mut first_failure = None;
    let mut record = |name: &str, ok: bool| {
        if !ok && first_failure.is_none() {
            first_failure = Some(name.to_string());
        }
    };
    record("closed", closed.holds);
    record("output_interference", output_interference.holds);
    record("computation_interference", computation_interference.holds);
    record("boundary", boundary.holds);
    if strict {
        record("shared_inputs", shared_inputs.is_empty());
    }
    let holds = first_failure.is_none();

    DecompositionReport {
        closed,
        output_interference,
        computation_interference,
        boundary,
        shared_inputs,
        strict,
        first_failure,
        holds,
    }
}

fn check_closed(components: &[TraceStructure]) -> ClosedVerdict {
    let produced: BTreeSet<Symbol> = components
        .iter()
        .flat_map(|c| c.outputs().iter().cloned())
        .collect();
    let consumed: BTreeSet<Symbol> = components
        .iter()
        .flat_map(|c| c.inputs().iter().cloned())
        .collect();
    let missing_producer: Vec<Symbol> = consumed.difference(&produced).cloned().collect();
    let missing_consumer: Vec<Symbol> = produced.difference(&consumed).cloned().collect();
    ClosedVerdict {
        holds: missing_producer.is_empty() && missing_consumer.is_empty(),
        missing_producer,
        missing_consumer,
    }
}

fn check_outputs(components: &[TraceStructure]) -> OutputVerdict {
    let mut clashes = Vec::new();
    for i in 0..components.len() {
        for j in i + 1..components.len() {
            for s in components[i].outputs().intersection(components[j].outputs()) {
                clashes.push(OutputClash {
                    symbol: s.clone(),
                    components: [i, j],
                });
            }
        }
    }
    OutputVerdict {
        holds: clashes.is_empty(),
        clashes,
    }
}

/// Breadth-first scan of the joint state space. Only produced symbols
/// advance the scan: a move fires an output some component enables and
/// steps every component that has the symbol in its alphabet. The witness
/// trace is therefore one the network itself can produce.
fn check_computation(components: &[TraceStructure]) -> ComputationVerdict {
    let accs: Vec<&RegularTraceSet> = components.iter().map(|c| c.traces()).collect();
    let init: Vec<usize> = accs.iter().map(|a| a.initial()).collect();
    let mut parent: HashMap<Vec<usize>, (Vec<usize>, Symbol)> = HashMap::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(init.clone());
    queue.push_back(init);

    while let Some(js) = queue.pop_front() {
        for (i, c) in components.iter().enumerate() {
            for (x, _) in accs[i].successors(js[i]) {
                if !c.outputs().contains(x) {
                    continue;
                }
                let mut next = js.clone();
                let mut blocked = None;
                for (j, cj) in components.iter().enumerate() {
                    if !cj.has_symbol(x) {
                        continue;
                    }
                    match accs[j].successor(js[j], x) {
                        Some(r) => next[j] = r,
                        None => {
                            blocked = Some(j);
                            break;
                        }
                    }
                }
                if let Some(j) = blocked {
                    return ComputationVerdict {
                        holds: false,
                        witness: Some(InterferenceWitness {
                            trace: reconstruct(&parent, &js),
                            symbol: x.clone(),
                            producer: i,
                            blocked: j,
                        }),
                    };
                }
                if seen.insert(next.clone()) {
                    parent.insert(next.clone(), (js.clone(), x.clone()));
                    queue.push_back(next);
                }
            }
        }
    }
    ComputationVerdict {
        holds: true,
        witness: None,
    }
}

fn reconstruct(parent: &HashMap<Vec<usize>, (Vec<usize>, Symbol)>, state: &[usize]) -> Trace {
    let mut symbols = Vec::new();
    let mut cur = state.to_vec();
    while let Some((prev, s)) = parent.get(&cur) {
        symbols.push(s.clone());
        cur = prev.clone();
    }
    symbols.reverse();
    Trace::from_symbols(symbols)
}

fn check_boundary(d: &Decomposition, components: &[TraceStructure]) -> BoundaryVerdict {
    let mut network = components[0].clone();
    for part in &components[1..] {
        network = network.weave(part);
    }
    let projected = network.project(&d.target.alphabet());
    match projected.traces().shortest_difference(d.target.traces()) {
        None => BoundaryVerdict {
            holds: true,
            distinguishing: None,
        },
        Some(t) => BoundaryVerdict {
            holds: false,
            distinguishing: Some(t),
        },
    }
}

fn shared_inputs(components: &[TraceStructure]) -> Vec<SharedInput> {
    let mut readers: BTreeMap<Symbol, Vec<usize>> = BTreeMap::new();
    for (i, c) in components.iter().enumerate() {
        for s in c.inputs() {
            readers.entry(s.clone()).or_default().push(i);
        }
    }
    readers
        .into_iter()
        .filter(|(_, r)| r.len() > 1)
        .map(|(symbol, readers)| SharedInput { symbol, readers })
        .collect()
}

/// Outcome of the alphabet side condition for substituting a component
/// into a larger decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct SubstitutionReport {
    pub holds: bool,
    /// Symbols shared between the outer pair and the inner pair that are
    /// not part of the connecting structure's alphabet.
    pub unexpected_shared: Vec<Symbol>,
    /// Symbols of the connecting structure missing from that intersection.
    pub missing_boundary: Vec<Symbol>,
}

/// If `s` decomposes into `r1` alongside `r0`, and `s` itself decomposes
/// into `r2` and `r3`, the flattened decomposition of `r0` into `r1`, `r2`,
/// `r3` is sound as long as the alphabets shared between the two levels are
/// exactly the alphabet of `s`. This checks that side condition.
pub fn check_substitution(
    r0: &TraceStructure,
    r1: &TraceStructure,
    r2: &TraceStructure,
    r3: &TraceStructure,
    s: &TraceStructure,
) -> SubstitutionReport {
    let outer: BTreeSet<Symbol> = r0.alphabet().union(&r1.alphabet()).cloned().collect();
    let inner: BTreeSet<Symbol> = r2.alphabet().union(&r3.alphabet()).cloned().collect();
    let shared: BTreeSet<Symbol> = outer.intersection(&inner).cloned().collect();
    let boundary = s.alphabet();
    let unexpected_shared: Vec<Symbol> = shared.difference(&boundary).cloned().collect();
    let missing_boundary: Vec<Symbol> = boundary.difference(&shared).cloned().collect();
    SubstitutionReport {
        holds: unexpected_shared.is_empty() && missing_boundary.is_empty(),
        unexpected_shared,
        missing_boundary,
    }
}

/// A pair of components whose merged outputs clash. Index 0 stands for the
/// two targets, higher indices for the merged parts at that position.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationClash {
    pub symbol: Symbol,
    pub components: [usize; 2],
}

/// Outcome of the side conditions for running two decompositions side by
/// side as one.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub holds: bool,
    /// Internal symbols (hidden from the targets) that both sides use.
    pub shared_internals: Vec<Symbol>,
    /// Merged components driving the same symbol, or driving a symbol the
    /// merged environment drives.
    pub output_clashes: Vec<SeparationClash>,
}

/// If `r[0]` decomposes into `r[1..]` and `s[0]` into `s[1..]`, the weaves
/// `r[0] || s[0]` decompose into the pairwise weaves `r[i] || s[i]` as long
/// as the two sides share no internal symbols and the merged components
/// have non-clashing outputs. Both lists must have the same length, at
/// least two.
pub fn check_separation(
    r: &[TraceStructure],
    s: &[TraceStructure],
) -> Result<SeparationReport, TraceError> {
    if r.len() != s.len() {
        return Err(TraceError::InvalidDecomposition(format!(
            "separation lists differ in length ({} vs {})",
            r.len(),
            s.len()
        )));
    }
    if r.len() < 2 {
        return Err(TraceError::InvalidDecomposition(
            "separation needs a target and at least one part on each side".into(),
        ));
    }
    let n = r.len();

    let internals = |list: &[TraceStructure]| -> BTreeSet<Symbol> {
        let target = list[0].alphabet();
        list[1..]
            .iter()
            .flat_map(|c| c.alphabet().into_iter())
            .filter(|sym| !target.contains(sym))
            .collect()
    };
    let shared_internals: Vec<Symbol> = internals(r).intersection(&internals(s)).cloned().collect();

    // Outputs of the merged component at each position; position 0 is the
    // reflected pair of targets, so its outputs are the targets' inputs.
    let merged_outputs = |i: usize| -> BTreeSet<Symbol> {
        if i == 0 {
            r[0].inputs().union(s[0].inputs()).cloned().collect()
        } else {
            r[i].outputs().union(s[i].outputs()).cloned().collect()
        }
    };
    let mut output_clashes = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for sym in merged_outputs(i).intersection(&merged_outputs(j)) {
                output_clashes.push(SeparationClash {
                    symbol: sym.clone(),
                    components: [i, j],
                });
            }
        }
    }

    Ok(SeparationReport {
        holds: shared_internals.is_empty() && output_clashes.is_empty(),
        shared_internals,
        output_clashes,
    })
}
