//! Symbols, traces, and trace structures.
//!
//! A trace structure is a triple `<inputs, outputs, traces>` where `traces`
//! is a regular set of finite words over `inputs ∪ outputs`. Circuit
//! specifications are the trace structures that are non-empty, prefix-closed,
//! and have disjoint input/output alphabets; the algebra below is closed over
//! arbitrary (also non-circuit) structures so that intermediate results of
//! elaboration and composition stay representable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::automaton::RegularTraceSet;
use crate::error::TraceError;

/// An atomic signal name: one terminal of one channel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(String);

impl Symbol {
    /// Symbol names are identifiers: `[A-Za-z][A-Za-z0-9_]*`, case-sensitive.
    pub fn new(name: impl Into<String>) -> Result<Self, TraceError> {
        let name = name.into();
        let mut chars = name.chars();
        let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
        if head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Ok(Symbol(name))
        } else {
            Err(TraceError::InvalidSymbol(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Symbol::new(raw).map_err(D::Error::custom)
    }
}

/// A finite word of symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Trace(Vec<Symbol>);

impl Trace {
    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        Trace(symbols)
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self, TraceError> {
        let symbols = names
            .into_iter()
            .map(Symbol::new)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trace(symbols))
    }

    /// One symbol per character; only usable with single-letter alphabets.
    pub fn from_word(word: &str) -> Result<Self, TraceError> {
        let symbols = word
            .chars()
            .map(|c| Symbol::new(c.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trace(symbols))
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Trace(v)
    }

    /// The trace with every symbol outside `keep` deleted.
    pub fn project(&self, keep: &BTreeSet<Symbol>) -> Trace {
        Trace(self.0.iter().filter(|s| keep.contains(s)).cloned().collect())
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(s.as_str())?;
        }
        Ok(())
    }
}

impl FromIterator<Symbol> for Trace {
    fn from_iter<T: IntoIterator<Item = Symbol>>(iter: T) -> Self {
        Trace(iter.into_iter().collect())
    }
}

/// A trace structure: input alphabet, output alphabet, and a regular trace
/// set over their union.
///
/// The embedded acceptor's alphabet is always exactly `inputs ∪ outputs`;
/// symbols the trace set never uses simply have no transitions.
#[derive(Debug, Clone)]
pub struct TraceStructure {
    inputs: BTreeSet<Symbol>,
    outputs: BTreeSet<Symbol>,
    traces: RegularTraceSet,
}

impl TraceStructure {
    /// Wraps an acceptor, widening its alphabet to `inputs ∪ outputs`.
    /// Fails if the acceptor uses symbols outside that union.
    pub fn new(
        inputs: BTreeSet<Symbol>,
        outputs: BTreeSet<Symbol>,
        traces: RegularTraceSet,
    ) -> Result<Self, TraceError> {
        let alphabet: BTreeSet<Symbol> = inputs.union(&outputs).cloned().collect();
        let traces = traces.with_alphabet(alphabet)?;
        Ok(TraceStructure { inputs, outputs, traces })
    }

    /// `<{s}, {}, {s}>`: the structure of a lone input symbol.
    pub fn input(s: Symbol) -> Self {
        let inputs: BTreeSet<Symbol> = [s.clone()].into();
        let traces = RegularTraceSet::single_symbol(inputs.clone(), s);
        TraceStructure { inputs, outputs: BTreeSet::new(), traces }
    }

    /// `<{}, {s}, {s}>`: the structure of a lone output symbol.
    pub fn output(s: Symbol) -> Self {
        let outputs: BTreeSet<Symbol> = [s.clone()].into();
        let traces = RegularTraceSet::single_symbol(outputs.clone(), s.clone());
        TraceStructure { inputs: BTreeSet::new(), outputs, traces }
    }

    /// The structure with the empty trace set.
    pub fn empty(inputs: BTreeSet<Symbol>, outputs: BTreeSet<Symbol>) -> Self {
        let alphabet: BTreeSet<Symbol> = inputs.union(&outputs).cloned().collect();
        let traces = RegularTraceSet::empty(alphabet);
        TraceStructure { inputs, outputs, traces }
    }

    /// The structure whose only trace is the empty trace.
    pub fn epsilon(inputs: BTreeSet<Symbol>, outputs: BTreeSet<Symbol>) -> Self {
        let alphabet: BTreeSet<Symbol> = inputs.union(&outputs).cloned().collect();
        let traces = RegularTraceSet::epsilon(alphabet);
        TraceStructure { inputs, outputs, traces }
    }

    pub fn inputs(&self) -> &BTreeSet<Symbol> {
        &self.inputs
    }

    pub fn outputs(&self) -> &BTreeSet<Symbol> {
        &self.outputs
    }

    /// `inputs ∪ outputs`.
    pub fn alphabet(&self) -> BTreeSet<Symbol> {
        self.inputs.union(&self.outputs).cloned().collect()
    }

    pub fn has_symbol(&self, s: &Symbol) -> bool {
        self.inputs.contains(s) || self.outputs.contains(s)
    }

    pub fn traces(&self) -> &RegularTraceSet {
        &self.traces
    }

    pub fn contains(&self, t: &Trace) -> bool {
        self.traces.contains(t)
    }

    /// All traces of length ≤ `n`, shortest first and lexicographic within
    /// each length. Errors when `n` exceeds the default bound.
    pub fn enumerate(&self, n: usize) -> Result<Vec<Trace>, TraceError> {
        self.traces.enumerate(n)
    }

    /// `enumerate` with an explicit length bound and an optional cap on the
    /// number of traces produced.
    pub fn enumerate_with(
        &self,
        n: usize,
        bound: usize,
        cap: Option<usize>,
    ) -> Result<Vec<Trace>, TraceError> {
        self.traces.enumerate_with(n, bound, cap)
    }

    /// Concatenation: alphabets united componentwise, trace sets concatenated.
    pub fn concat(&self, other: &TraceStructure) -> TraceStructure {
        TraceStructure {
            inputs: self.inputs.union(&other.inputs).cloned().collect(),
            outputs: self.outputs.union(&other.outputs).cloned().collect(),
            traces: self.traces.concat(&other.traces),
        }
    }

    /// Union: alphabets united componentwise, trace sets united.
    pub fn union(&self, other: &TraceStructure) -> TraceStructure {
        TraceStructure {
            inputs: self.inputs.union(&other.inputs).cloned().collect(),
            outputs: self.outputs.union(&other.outputs).cloned().collect(),
            traces: self.traces.union(&other.traces),
        }
    }

    /// Repetition `*[R]`: all finite (possibly empty) concatenations.
    pub fn repeat(&self) -> TraceStructure {
        TraceStructure {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            traces: self.traces.star(),
        }
    }

    /// Prefix-closure.
    pub fn pref(&self) -> TraceStructure {
        TraceStructure {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            traces: self.traces.pref(),
        }
    }

    /// Projection onto `keep`: alphabets intersected, symbols outside `keep`
    /// deleted from every trace.
    pub fn project(&self, keep: &BTreeSet<Symbol>) -> TraceStructure {
        TraceStructure {
            inputs: self.inputs.intersection(keep).cloned().collect(),
            outputs: self.outputs.intersection(keep).cloned().collect(),
            traces: self.traces.project(keep),
        }
    }

    /// Weave: traces over the united alphabet whose projection onto each
    /// operand's alphabet lies in that operand's trace set. Shared symbols
    /// synchronize; private symbols interleave freely. A symbol that any
    /// operand outputs is an output of the whole, so a producer absorbs the
    /// other side's matching input.
    pub fn weave(&self, other: &TraceStructure) -> TraceStructure {
        let outputs: BTreeSet<Symbol> = self.outputs.union(&other.outputs).cloned().collect();
        let inputs: BTreeSet<Symbol> = self
            .inputs
            .union(&other.inputs)
            .filter(|s| !outputs.contains(*s))
            .cloned()
            .collect();
        TraceStructure {
            inputs,
            outputs,
            traces: self.traces.weave(&other.traces),
        }
    }

    /// Reflection: swaps the input and output alphabets, traces unchanged.
    pub fn reflect(&self) -> TraceStructure {
        TraceStructure {
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
            traces: self.traces.clone(),
        }
    }

    /// Structural equality: equal alphabets and equal trace sets, decided on
    /// canonical acceptors.
    pub fn equals(&self, other: &TraceStructure) -> bool {
        self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.traces.language_eq(&other.traces)
    }

    /// Renames symbols throughout. `mapping` may be partial (identity
    /// elsewhere) but its completion must be injective on the alphabet.
    pub fn rename(&self, mapping: &BTreeMap<Symbol, Symbol>) -> Result<TraceStructure, TraceError> {
        let apply = |s: &Symbol| mapping.get(s).unwrap_or(s).clone();
        let mut seen: BTreeMap<Symbol, Symbol> = BTreeMap::new();
        for s in self.alphabet() {
            let target = apply(&s);
            if let Some(prev) = seen.get(&target) {
                return Err(TraceError::NonInjectiveRenaming(
                    prev.as_str().to_string(),
                    s.as_str().to_string(),
                    target.as_str().to_string(),
                ));
            }
            seen.insert(target, s.clone());
        }
        Ok(TraceStructure {
            inputs: self.inputs.iter().map(&apply).collect(),
            outputs: self.outputs.iter().map(&apply).collect(),
            traces: self.traces.rename(&apply),
        })
    }

    pub fn is_prefix_closed(&self) -> bool {
        self.traces.is_prefix_closed()
    }

    /// Circuit specifications: disjoint alphabets, non-empty, prefix-closed.
    pub fn validate_circuit_spec(&self) -> Result<(), TraceError> {
        if let Some(s) = self.inputs.intersection(&self.outputs).next() {
            return Err(TraceError::NotCircuitSpec(format!(
                "symbol {:?} is both input and output",
                s.as_str()
            )));
        }
        if self.traces.is_empty_language() {
            return Err(TraceError::NotCircuitSpec("trace set is empty".into()));
        }
        if !self.traces.is_prefix_closed() {
            return Err(TraceError::NotCircuitSpec("trace set is not prefix-closed".into()));
        }
        Ok(())
    }

    /// Compact canonical JSON: alphabets sorted, states numbered by
    /// breadth-first discovery over symbols sorted by name, transition list
    /// sorted.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("canonical form serializes")
    }

    pub fn from_canonical_json(text: &str) -> Result<Self, TraceError> {
        serde_json::from_str(text).map_err(|e| TraceError::Malformed(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct TraceStructureRepr {
    inputs: Vec<Symbol>,
    outputs: Vec<Symbol>,
    states: usize,
    initial: usize,
    accepting: Vec<usize>,
    transitions: Vec<(usize, Symbol, usize)>,
}

impl Serialize for TraceStructure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = TraceStructureRepr {
            inputs: self.inputs.iter().cloned().collect(),
            outputs: self.outputs.iter().cloned().collect(),
            states: self.traces.state_count(),
            initial: self.traces.initial(),
            accepting: self.traces.accepting().iter().copied().collect(),
            transitions: self
                .traces
                .transitions()
                .map(|(q, sym, r)| (q, sym.clone(), r))
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TraceStructure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TraceStructureRepr::deserialize(d)?;
        let inputs: BTreeSet<Symbol> = repr.inputs.into_iter().collect();
        let outputs: BTreeSet<Symbol> = repr.outputs.into_iter().collect();
        let alphabet: BTreeSet<Symbol> = inputs.union(&outputs).cloned().collect();
        let traces = RegularTraceSet::from_parts(
            alphabet,
            repr.states,
            repr.initial,
            repr.accepting,
            repr.transitions,
        )
        .map_err(D::Error::custom)?;
        TraceStructure::new(inputs, outputs, traces).map_err(D::Error::custom)
    }
}

/// Builds a symbol set from literal names. Panics on an invalid name, so it
/// is meant for fixed names known at compile time (tests, built-in specs).
pub fn set_of(names: &[&str]) -> BTreeSet<Symbol> {
    names
        .iter()
        .map(|n| Symbol::new(*n).expect("valid symbol name"))
        .collect()
}
