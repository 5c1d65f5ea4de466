//! Decision procedures for delay-insensitive operation.
//!
//! All checks run on the canonical acceptor of a structure's trace set and
//! quantify over its prefix-closure: a trace is "possible" when the acceptor
//! has a live run for it. Circuit specifications are prefix-closed already,
//! so for them possible and accepted coincide.
//!
//! The rules, over a structure with inputs `I` and outputs `O`:
//!
//! - R0: no possible trace sends the same symbol twice in a row.
//! - R1: two symbols of the same direction that can both follow a trace
//!   commute: both orders lead to the same behavior, or neither order is
//!   possible.
//! - R2: any two symbols that can occur in both orders after a trace lead
//!   to the same behavior. Stronger than needed; reported but not part of
//!   the delay-insensitivity verdict.
//! - R2': for `a` and `c` of one direction and `b` of the other, if
//!   `s a b t c` is possible and `s b a t` is possible, then `s b a t c`
//!   is possible: reordering an input against an output cannot unlock a
//!   same-direction continuation in one order only.
//! - R3' / R3'' / R3''': no symbol disables another, graded by direction.
//!   `a` disables `b` after `s` when `s a` and `s b` are possible but
//!   `s a b` is not. R3' forbids all disabling, R3'' allows it between
//!   inputs only, R3''' additionally allows it between outputs and only
//!   forbids mixed-direction disabling.
//!
//! The delay-insensitivity verdict is R0 ∧ R1 ∧ R2' ∧ R3'''. Structures
//! passing R0, R1 and R2' are classified by the strongest R3 variant they
//! satisfy: R3' synchronization, R3'' data communication, R3''' arbitration.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automaton::RegularTraceSet;
use crate::trace::{Symbol, Trace, TraceStructure};

/// How many minimal witnesses a rule report keeps per rule.
const WITNESS_LIMIT: usize = 8;

/// A machine-checkable counterexample to one rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// The shortest trace leading to the violating situation.
    pub prefix: Trace,
    /// The symbols whose orderings the rule constrains, in rule order.
    pub symbols: Vec<Symbol>,
    /// The continuation `t` for rules that quantify over one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<Trace>,
    pub explanation: String,
}

/// The verdict of one rule over one structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub holds: bool,
    /// Minimal witnesses, sorted shortest first; empty when the rule holds.
    pub witnesses: Vec<Witness>,
    /// How many local configurations the scan examined.
    pub checked: usize,
}

/// The three interface disciplines a delay-insensitive structure can have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitClass {
    Synchronization,
    DataCommunication,
    Arbitration,
}

impl fmt::Display for CircuitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CircuitClass::Synchronization => "synchronization",
            CircuitClass::DataCommunication => "data-communication",
            CircuitClass::Arbitration => "arbitration",
        })
    }
}

/// All rule verdicts for one structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleReport {
    /// Keyed by rule name: R0, R1, R2, R2', R3', R3'', R3'''.
    pub rules: BTreeMap<String, RuleOutcome>,
    /// The interface discipline, when R0, R1 and R2' hold and some R3
    /// variant does.
    pub class: Option<CircuitClass>,
    /// R0 ∧ R1 ∧ R2' ∧ R3'''.
    pub di: bool,
}

impl RuleReport {
    pub fn rule(&self, name: &str) -> &RuleOutcome {
        &self.rules[name]
    }
}

/// Runs every rule and derives the verdict and class.
pub fn check_all(ts: &TraceStructure) -> RuleReport {
    let r0 = check_r0(ts);
    let r1 = check_r1(ts);
    let r2 = check_r2(ts);
    let r2p = check_r2_prime(ts);
    let (r3p, r3pp, r3ppp) = check_r3_family(ts);
    let base = r0.holds && r1.holds && r2p.holds;
    let class = if !base {
        None
    } else if r3p.holds {
        Some(CircuitClass::Synchronization)
    } else if r3pp.holds {
        Some(CircuitClass::DataCommunication)
    } else if r3ppp.holds {
        Some(CircuitClass::Arbitration)
    } else {
        None
    };
    let di = base && r3ppp.holds;
    let rules = [
        ("R0", r0),
        ("R1", r1),
        ("R2", r2),
        ("R2'", r2p),
        ("R3'", r3p),
        ("R3''", r3pp),
        ("R3'''", r3ppp),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    RuleReport { rules, class, di }
}

/// R0 ∧ R1 ∧ R2' ∧ R3'''.
pub fn check_di(ts: &TraceStructure) -> bool {
    check_all(ts).di
}

/// The interface discipline, when the structure has one.
pub fn classify(ts: &TraceStructure) -> Option<CircuitClass> {
    check_all(ts).class
}

/// R0: no symbol fires twice in a row.
pub fn check_r0(ts: &TraceStructure) -> RuleOutcome {
    let acc = ts.traces();
    let mut witnesses = Vec::new();
    let mut checked = 0;
    for q in 0..acc.state_count() {
        for (a, p) in acc.successors(q) {
            checked += 1;
            if acc.successor(p, a).is_some() {
                witnesses.push(Witness {
                    prefix: acc.shortest_prefix_reaching(q),
                    symbols: vec![a.clone(), a.clone()],
                    segment: None,
                    explanation: format!("{a} can fire twice with no event between"),
                });
            }
        }
    }
    finish(witnesses, checked)
}

/// R1: same-direction symbols commute wherever both orders start.
pub fn check_r1(ts: &TraceStructure) -> RuleOutcome {
    let acc = ts.traces();
    let pairs = same_direction_pairs(ts);
    let mut witnesses = Vec::new();
    let mut checked = 0;
    for q in 0..acc.state_count() {
        for (a, b) in &pairs {
            checked += 1;
            let ab = run2(acc, q, a, b);
            let ba = run2(acc, q, b, a);
            match (ab, ba) {
                (None, None) => {}
                (Some(x), Some(y)) if x == y => {}
                (Some(_), None) => witnesses.push(Witness {
                    prefix: acc.shortest_prefix_reaching(q),
                    symbols: vec![a.clone(), b.clone()],
                    segment: None,
                    explanation: format!("{a} then {b} is possible but {b} then {a} is not"),
                }),
                (None, Some(_)) => witnesses.push(Witness {
                    prefix: acc.shortest_prefix_reaching(q),
                    symbols: vec![a.clone(), b.clone()],
                    segment: None,
                    explanation: format!("{b} then {a} is possible but {a} then {b} is not"),
                }),
                (Some(x), Some(y)) => {
                    let t = distinguishing_suffix(acc, x, y);
                    witnesses.push(Witness {
                        prefix: acc.shortest_prefix_reaching(q),
                        symbols: vec![a.clone(), b.clone()],
                        segment: Some(t.clone()),
                        explanation: format!(
                            "{a}{b} and {b}{a} diverge: the continuation {t} follows one order only"
                        ),
                    });
                }
            }
        }
    }
    finish(witnesses, checked)
}

/// R2: any pair that can occur in both orders commutes. Informational only.
pub fn check_r2(ts: &TraceStructure) -> RuleOutcome {
    let acc = ts.traces();
    let alphabet: Vec<Symbol> = ts.alphabet().into_iter().collect();
    let mut witnesses = Vec::new();
    let mut checked = 0;
    for q in 0..acc.state_count() {
        for (i, a) in alphabet.iter().enumerate() {
            for b in &alphabet[i + 1..] {
                checked += 1;
                if let (Some(x), Some(y)) = (run2(acc, q, a, b), run2(acc, q, b, a)) {
                    if x != y {
                        let t = distinguishing_suffix(acc, x, y);
                        witnesses.push(Witness {
                            prefix: acc.shortest_prefix_reaching(q),
                            symbols: vec![a.clone(), b.clone()],
                            segment: Some(t.clone()),
                            explanation: format!(
                                "{a}{b} and {b}{a} diverge: the continuation {t} follows one order only"
                            ),
                        });
                    }
                }
            }
        }
    }
    finish(witnesses, checked)
}

/// R2': reordering a mixed-direction pair cannot unlock a same-direction
/// continuation in one order only. Decided exactly by a search over joint
/// states of the two orders.
pub fn check_r2_prime(ts: &TraceStructure) -> RuleOutcome {
    let acc = ts.traces();
    let inputs: Vec<Symbol> = ts.inputs().iter().cloned().collect();
    let outputs: Vec<Symbol> = ts.outputs().iter().cloned().collect();
    let mut memo: HashMap<(usize, usize, bool), Option<(Trace, Symbol)>> = HashMap::new();
    let mut witnesses = Vec::new();
    let mut checked = 0;
    for q in 0..acc.state_count() {
        for a in inputs.iter().chain(&outputs) {
            let a_is_input = ts.inputs().contains(a);
            let others = if a_is_input { &outputs } else { &inputs };
            for b in others {
                checked += 1;
                let (Some(p1), Some(p2)) = (run2(acc, q, a, b), run2(acc, q, b, a)) else {
                    continue;
                };
                if p1 == p2 {
                    continue;
                }
                let cands = if a_is_input { &inputs } else { &outputs };
                let hit = memo
                    .entry((p1, p2, a_is_input))
                    .or_insert_with(|| pair_violation(acc, p1, p2, cands))
                    .clone();
                if let Some((t, c)) = hit {
                    witnesses.push(Witness {
                        prefix: acc.shortest_prefix_reaching(q),
                        symbols: vec![a.clone(), b.clone()],
                        segment: Some(t.clone()),
                        explanation: format!(
                            "after {a}{b} the continuation {t} enables {c}, after {b}{a} it does not"
                        ),
                    });
                }
            }
        }
    }
    finish(witnesses, checked)
}

/// The R3 family, graded by which directions may disable each other.
pub fn check_r3_family(ts: &TraceStructure) -> (RuleOutcome, RuleOutcome, RuleOutcome) {
    let (disables, checked) = scan_disables(ts);
    let mut strict = Vec::new(); // violates R3'
    let mut nonin = Vec::new(); // violates R3'' (some symbol is an output)
    let mut mixed = Vec::new(); // violates R3''' (exactly one input)
    for (w, a_in, b_in) in disables {
        strict.push(w.clone());
        if !(a_in && b_in) {
            nonin.push(w.clone());
        }
        if a_in != b_in {
            mixed.push(w);
        }
    }
    (
        finish(strict, checked),
        finish(nonin, checked),
        finish(mixed, checked),
    )
}

/// R3': no symbol ever disables another.
pub fn check_r3_prime(ts: &TraceStructure) -> RuleOutcome {
    check_r3_family(ts).0
}

/// R3'': only inputs may disable each other.
pub fn check_r3_double_prime(ts: &TraceStructure) -> RuleOutcome {
    check_r3_family(ts).1
}

/// R3''': mixed-direction disabling is forbidden; same-direction allowed.
pub fn check_r3_triple_prime(ts: &TraceStructure) -> RuleOutcome {
    check_r3_family(ts).2
}

fn scan_disables(ts: &TraceStructure) -> (Vec<(Witness, bool, bool)>, usize) {
    let acc = ts.traces();
    let alphabet: Vec<Symbol> = ts.alphabet().into_iter().collect();
    let mut out = Vec::new();
    let mut checked = 0;
    for q in 0..acc.state_count() {
        for a in &alphabet {
            for b in &alphabet {
                if a == b {
                    continue;
                }
                checked += 1;
                let (Some(pa), Some(_)) = (acc.successor(q, a), acc.successor(q, b)) else {
                    continue;
                };
                if acc.successor(pa, b).is_none() {
                    let w = Witness {
                        prefix: acc.shortest_prefix_reaching(q),
                        symbols: vec![a.clone(), b.clone()],
                        segment: None,
                        explanation: format!("{a} disables {b}"),
                    };
                    out.push((w, ts.inputs().contains(a), ts.inputs().contains(b)));
                }
            }
        }
    }
    (out, checked)
}

/// Both-orders joint search for an R2' violation from the pair
/// (state after `ab`, state after `ba`): the shortest continuation `t` and
/// candidate `c` with `t c` live on the first side and `t` live but `t c`
/// dead on the second.
fn pair_violation(
    acc: &RegularTraceSet,
    p1: usize,
    p2: usize,
    cands: &[Symbol],
) -> Option<(Trace, Symbol)> {
    let mut seen = std::collections::BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert((p1, p2));
    queue.push_back((p1, p2, Trace::empty()));
    while let Some((x, y, t)) = queue.pop_front() {
        for c in cands {
            if acc.successor(x, c).is_some() && acc.successor(y, c).is_none() {
                return Some((t, c.clone()));
            }
        }
        for (s, nx) in acc.successors(x) {
            if let Some(ny) = acc.successor(y, s) {
                if seen.insert((nx, ny)) {
                    let mut nt = t.clone();
                    nt.push(s.clone());
                    queue.push_back((nx, ny, nt));
                }
            }
        }
    }
    None
}

/// The shortest continuation accepted from exactly one of two live states.
/// Exists whenever the states differ, because the acceptor is minimal.
fn distinguishing_suffix(acc: &RegularTraceSet, x: usize, y: usize) -> Trace {
    assert_ne!(x, y, "equal states have no distinguishing suffix");
    let mut seen = std::collections::BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert((Some(x), Some(y)));
    queue.push_back((Some(x), Some(y), Trace::empty()));
    let accepts = |q: Option<usize>| q.is_some_and(|q| acc.is_accepting(q));
    while let Some((x, y, t)) = queue.pop_front() {
        if accepts(x) != accepts(y) {
            return t;
        }
        let syms: Vec<Symbol> = acc.alphabet().iter().cloned().collect();
        for s in syms {
            let nx = x.and_then(|q| acc.successor(q, &s));
            let ny = y.and_then(|q| acc.successor(q, &s));
            if nx.is_none() && ny.is_none() {
                continue;
            }
            if seen.insert((nx, ny)) {
                let mut nt = t.clone();
                nt.push(s);
                queue.push_back((nx, ny, nt));
            }
        }
    }
    unreachable!("minimal acceptors distinguish distinct states")
}

fn same_direction_pairs(ts: &TraceStructure) -> Vec<(Symbol, Symbol)> {
    let mut pairs = Vec::new();
    for set in [ts.inputs(), ts.outputs()] {
        let v: Vec<&Symbol> = set.iter().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                pairs.push((v[i].clone(), v[j].clone()));
            }
        }
    }
    pairs
}

fn run2(acc: &RegularTraceSet, q: usize, a: &Symbol, b: &Symbol) -> Option<usize> {
    acc.successor(q, a).and_then(|p| acc.successor(p, b))
}

fn finish(mut witnesses: Vec<Witness>, checked: usize) -> RuleOutcome {
    witnesses.sort_by_key(|w| {
        (
            w.prefix.len(),
            w.prefix.to_string(),
            w.symbols.iter().map(|s| s.as_str().to_string()).collect::<Vec<_>>(),
            w.segment.as_ref().map(|t| t.to_string()),
        )
    });
    witnesses.dedup_by(|a, b| a.prefix == b.prefix && a.symbols == b.symbols && a.segment == b.segment);
    let holds = witnesses.is_empty();
    witnesses.truncate(WITNESS_LIMIT);
    RuleOutcome { holds, witnesses, checked }
}
