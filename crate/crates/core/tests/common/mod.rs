//! Shared integration-test harness: brute-force equivalence oracles for the
//! algebra operations and rule verdicts, and the algebraic law suites as
//! reusable property runners. Included by the oracle, algebra and acceptance
//! targets, so not every item is used by every includer.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ditrace::automaton::RegularTraceSet;
use ditrace::rules::{check_all, RuleReport, Witness};
use ditrace::trace::{Symbol, Trace, TraceStructure};

const OP_LEN: usize = 8;
const RULE_LEN: usize = 10;
/// Live-prefix cap per enumeration; a hit redraws the case.
const OP_CAP: usize = 6_000;
const RULE_CAP: usize = 4_000;
/// Node budget for the weave candidate walk; a hit redraws the case.
const WEAVE_BUDGET: usize = 400_000;

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn below(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n as u64) as usize
    }

    fn chance(&mut self, percent: u64) -> bool {
        self.rng.next_u64() % 100 < percent
    }

    /// Universe of 1..=4 symbols, each with a fixed direction.
    fn universe(&mut self) -> Vec<(Symbol, bool)> {
        let n = 1 + self.below(4);
        ["a", "b", "c", "d"][..n]
            .iter()
            .map(|s| (Symbol::new(*s).unwrap(), self.chance(50)))
            .collect()
    }

    /// Random structure over a non-empty sub-alphabet of the universe,
    /// at most six canonical states.
    fn structure(&mut self, universe: &[(Symbol, bool)], prefix_closed: bool) -> TraceStructure {
        loop {
            let mut chosen: Vec<usize> = (0..universe.len()).filter(|_| self.chance(70)).collect();
            if chosen.is_empty() {
                chosen.push(self.below(universe.len()));
            }
            let states = 1 + self.below(6);
            let density = 25 + self.below(45) as u64;
            let mut transitions = Vec::new();
            for q in 0..states {
                for &i in &chosen {
                    if self.chance(density) {
                        transitions.push((q, universe[i].0.clone(), self.below(states)));
                    }
                }
            }
            let accepting: Vec<usize> = if prefix_closed {
                (0..states).collect()
            } else {
                (0..states).filter(|_| self.chance(60)).collect()
            };
            let alphabet: BTreeSet<Symbol> = chosen.iter().map(|&i| universe[i].0.clone()).collect();
            let Ok(set) =
                RegularTraceSet::from_parts(alphabet, states, 0, accepting, transitions)
            else {
                continue;
            };
            let inputs = chosen.iter().filter(|&&i| universe[i].1).map(|&i| universe[i].0.clone());
            let outputs =
                chosen.iter().filter(|&&i| !universe[i].1).map(|&i| universe[i].0.clone());
            return TraceStructure::new(inputs.collect(), outputs.collect(), set).unwrap();
        }
    }
}

fn enum_set(ts: &TraceStructure, n: usize, cap: usize) -> Option<BTreeSet<Trace>> {
    ts.enumerate_with(n, n, Some(cap)).ok().map(|v| v.into_iter().collect())
}

fn set_enum(set: &RegularTraceSet, n: usize, cap: usize) -> Option<BTreeSet<Trace>> {
    set.enumerate_with(n, n, Some(cap)).ok().map(|v| v.into_iter().collect())
}

fn extended(t: &Trace, s: &Symbol) -> Trace {
    let mut e = t.clone();
    e.push(s.clone());
    e
}

fn prefixes(set: &BTreeSet<Trace>) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    for t in set {
        for k in 0..=t.len() {
            out.insert(Trace::from_symbols(t.symbols()[..k].to_vec()));
        }
    }
    out
}

/// Exact preimage search for projection: does some member of `acc` project
/// onto `w`? Breadth-first over (state, matched position) pairs.
fn has_preimage(acc: &RegularTraceSet, keep: &BTreeSet<Symbol>, w: &Trace) -> bool {
    let want = w.symbols();
    let start = (acc.initial(), 0usize);
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((q, i)) = queue.pop_front() {
        if i == want.len() && acc.is_accepting(q) {
            return true;
        }
        for (sym, r) in acc.successors(q) {
            let next = if keep.contains(sym) {
                if i < want.len() && sym == &want[i] {
                    Some((r, i + 1))
                } else {
                    None
                }
            } else {
                Some((r, i))
            };
            if let Some(n) = next {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

/// The weave set formula at bound `OP_LEN`: strings over the united alphabet
/// whose projections onto each operand's alphabet are members. Walks the
/// candidate trie, pruning branches whose projections stop being prefixes of
/// enumerated members.
fn brute_weave(
    r: &TraceStructure,
    s: &TraceStructure,
    tr: &BTreeSet<Trace>,
    ts: &BTreeSet<Trace>,
) -> Option<BTreeSet<Trace>> {
    let ar = r.alphabet();
    let bs = s.alphabet();
    let union: Vec<Symbol> = ar.union(&bs).cloned().collect();
    let pr = prefixes(tr);
    let ps = prefixes(ts);
    let mut out = BTreeSet::new();
    let mut budget = WEAVE_BUDGET;
    let mut stack = vec![(Trace::empty(), Trace::empty(), Trace::empty())];
    while let Some((t, proj_r, proj_s)) = stack.pop() {
        budget = budget.checked_sub(1)?;
        if tr.contains(&proj_r) && ts.contains(&proj_s) {
            out.insert(t.clone());
        }
        if t.len() == OP_LEN {
            continue;
        }
        for sym in &union {
            let nr = if ar.contains(sym) { extended(&proj_r, sym) } else { proj_r.clone() };
            let ns = if bs.contains(sym) { extended(&proj_s, sym) } else { proj_s.clone() };
            if pr.contains(&nr) && ps.contains(&ns) {
                stack.push((extended(&t, sym), nr, ns));
            }
        }
    }
    Some(out)
}

/// Checks every operation on one pair; None redraws the case.
fn ops_case(r: &TraceStructure, s: &TraceStructure, bad: &mut Vec<String>) -> Option<()> {
    let tr = enum_set(r, OP_LEN, OP_CAP)?;
    let ts = enum_set(s, OP_LEN, OP_CAP)?;

    let refl = r.reflect();
    if enum_set(&refl, OP_LEN, OP_CAP)? != tr {
        bad.push("reflect changed the trace set".into());
    }
    if refl.inputs() != r.outputs() || refl.outputs() != r.inputs() {
        bad.push("reflect did not swap the alphabets".into());
    }

    let want: BTreeSet<Trace> = tr.union(&ts).cloned().collect();
    if enum_set(&r.union(s), OP_LEN, OP_CAP)? != want {
        bad.push("union disagrees with the set union".into());
    }

    let want: BTreeSet<Trace> = tr.intersection(&ts).cloned().collect();
    if set_enum(&r.traces().intersect(s.traces()), OP_LEN, OP_CAP)? != want {
        bad.push("intersect disagrees with the set intersection".into());
    }

    let mut want = BTreeSet::new();
    for x in &tr {
        for y in &ts {
            if x.len() + y.len() <= OP_LEN {
                want.insert(x.concat(y));
            }
        }
    }
    if enum_set(&r.concat(s), OP_LEN, OP_CAP)? != want {
        bad.push("concat disagrees with pairwise concatenation".into());
    }

    let mut want: BTreeSet<Trace> = BTreeSet::from([Trace::empty()]);
    loop {
        let snapshot: Vec<Trace> = want.iter().cloned().collect();
        let before = want.len();
        for w in &snapshot {
            for x in &tr {
                if w.len() + x.len() <= OP_LEN {
                    want.insert(w.concat(x));
                }
            }
        }
        if want.len() == before {
            break;
        }
    }
    if enum_set(&r.repeat(), OP_LEN, OP_CAP)? != want {
        bad.push("repeat disagrees with iterated concatenation".into());
    }

    // A live state reaches acceptance within state-count steps, so this
    // deepened enumeration captures every prefix of length up to the bound.
    let deep = OP_LEN + r.traces().state_count();
    let deep_tr = enum_set(r, deep, OP_CAP * 8)?;
    let mut want = BTreeSet::new();
    for t in &deep_tr {
        for k in 0..=t.len().min(OP_LEN) {
            want.insert(Trace::from_symbols(t.symbols()[..k].to_vec()));
        }
    }
    if enum_set(&r.pref(), OP_LEN, OP_CAP * 8)? != want {
        bad.push("pref disagrees with the prefix set".into());
    }

    // Projection: the image of the deepened enumeration must be accepted,
    // and every accepted trace must have a preimage.
    let keep = s.alphabet();
    let proj = r.project(&keep);
    for t in &deep_tr {
        if !proj.contains(&t.project(&keep)) {
            bad.push(format!("project misses the image of {t}"));
            break;
        }
    }
    for w in enum_set(&proj, OP_LEN, OP_CAP * 8)? {
        if !has_preimage(r.traces(), &keep, &w) {
            bad.push(format!("project invents {w}"));
            break;
        }
    }

    let want = brute_weave(r, s, &tr, &ts)?;
    if enum_set(&r.weave(s), OP_LEN, OP_CAP * 8)? != want {
        bad.push("weave disagrees with its set formula".into());
    }
    // Directions never change the woven trace set, only the alphabets.
    let flipped = r.weave(&s.reflect());
    if enum_set(&flipped, OP_LEN, OP_CAP * 8)? != want {
        bad.push("weave against the reflected operand changed the trace set".into());
    }

    // The language-equality oracle agrees with the first enumerated
    // difference, where one exists within the bound.
    let brute_first = tr.symmetric_difference(&ts).min_by_key(|t| (t.len(), (*t).clone()));
    match (r.traces().shortest_difference(s.traces()), brute_first) {
        (None, Some(t)) => bad.push(format!("equality claimed, yet {t} separates")),
        (Some(d), None) if d.len() <= OP_LEN => {
            bad.push(format!("difference {d} within the bound, none enumerated"))
        }
        (Some(d), Some(t)) if d.len() <= OP_LEN => {
            if d.len() != t.len() {
                bad.push(format!("difference {d} is not shortest; {t} is shorter"));
            }
            if tr.contains(&d) == ts.contains(&d) {
                bad.push(format!("difference {d} fails to separate the sets"));
            }
        }
        _ => {}
    }
    Some(())
}

/// Runs the operation oracle over `cases` random structure pairs. Returns
/// how many cases were checked and every disagreement found.
pub fn run_ops_oracle(cases: usize) -> (usize, Vec<String>) {
    let mut gen = Gen::new(0x0D15EA5E);
    let mut checked = 0;
    let mut drawn = 0;
    let mut bad = Vec::new();
    while checked < cases {
        drawn += 1;
        assert!(drawn < cases * 40, "too many redraws; loosen the caps");
        let universe = gen.universe();
        let r = gen.structure(&universe, false);
        let s = gen.structure(&universe, false);
        let mut case_bad = Vec::new();
        if ops_case(&r, &s, &mut case_bad).is_none() {
            continue;
        }
        for b in case_bad {
            bad.push(format!("case {drawn}: {b}"));
        }
        checked += 1;
    }
    (checked, bad)
}

// Rule oracles. Structures here are prefix-closed, so membership and
// possibility coincide and `contains` decides both.

fn dirs(ts: &TraceStructure, s: &Symbol) -> bool {
    ts.inputs().contains(s)
}

fn with_swap(sy: &[Symbol], i: usize) -> Trace {
    let mut v = sy.to_vec();
    v.swap(i, i + 1);
    Trace::from_symbols(v)
}

/// R0 scan: some member repeats a symbol back to back.
fn brute_r0(t10: &BTreeSet<Trace>) -> bool {
    t10.iter().any(|t| t.symbols().windows(2).any(|w| w[0] == w[1]))
}

/// R1 scan: a same-direction adjacent pair cannot be swapped.
fn brute_r1(ts: &TraceStructure, t10: &BTreeSet<Trace>) -> bool {
    for u in t10 {
        let sy = u.symbols();
        for i in 0..sy.len().saturating_sub(1) {
            let (a, b) = (&sy[i], &sy[i + 1]);
            if a != b && dirs(ts, a) == dirs(ts, b) && !ts.contains(&with_swap(sy, i)) {
                return true;
            }
        }
    }
    false
}

/// R2 scan: an adjacent pair possible in both orders diverges later.
fn brute_r2(ts: &TraceStructure, t10: &BTreeSet<Trace>) -> bool {
    for u in t10 {
        let sy = u.symbols();
        for i in 0..sy.len().saturating_sub(1) {
            if sy[i] == sy[i + 1] {
                continue;
            }
            let swapped = with_swap(sy, i);
            let both = Trace::from_symbols(swapped.symbols()[..i + 2].to_vec());
            if ts.contains(&both) && !ts.contains(&swapped) {
                return true;
            }
        }
    }
    false
}

/// R2' scan: swapping a mixed-direction pair blocks a later symbol of the
/// first symbol's direction.
fn brute_r2_prime(ts: &TraceStructure, t10: &BTreeSet<Trace>) -> bool {
    for u in t10 {
        let sy = u.symbols();
        for i in 0..sy.len().saturating_sub(1) {
            if sy[i] == sy[i + 1] || dirs(ts, &sy[i]) == dirs(ts, &sy[i + 1]) {
                continue;
            }
            let swapped = with_swap(sy, i);
            for j in i + 2..sy.len() {
                if dirs(ts, &sy[j]) != dirs(ts, &sy[i]) {
                    continue;
                }
                let alt = swapped.symbols();
                let premise = Trace::from_symbols(alt[..j].to_vec());
                let blocked = Trace::from_symbols(alt[..=j].to_vec());
                if ts.contains(&premise) && !ts.contains(&blocked) {
                    return true;
                }
            }
        }
    }
    false
}

/// Disable scan: returns (any, any with an output, any mixed-direction).
fn brute_disables(ts: &TraceStructure, t10: &BTreeSet<Trace>) -> (bool, bool, bool) {
    let alphabet: Vec<Symbol> = ts.alphabet().into_iter().collect();
    let (mut any, mut with_output, mut mixed) = (false, false, false);
    for s in t10 {
        if s.len() + 2 > RULE_LEN {
            continue;
        }
        for a in &alphabet {
            for b in &alphabet {
                if a == b {
                    continue;
                }
                let sa = extended(s, a);
                if !ts.contains(&sa) || !ts.contains(&extended(s, b)) {
                    continue;
                }
                if ts.contains(&extended(&sa, b)) {
                    continue;
                }
                let (ai, bi) = (dirs(ts, a), dirs(ts, b));
                any = true;
                with_output |= !(ai && bi);
                mixed |= ai != bi;
            }
        }
    }
    (any, with_output, mixed)
}

fn cat(prefix: &Trace, tail: &[Symbol]) -> Trace {
    let mut t = prefix.clone();
    for s in tail {
        t.push(s.clone());
    }
    t
}

/// Replays a reported witness through trace membership. Sound for
/// prefix-closed structures, where membership decides possibility.
pub fn witness_replays(ts: &TraceStructure, rule: &str, w: &Witness) -> bool {
    let (a, b) = (&w.symbols[0], &w.symbols[1]);
    match rule {
        "R0" => ts.contains(&cat(&w.prefix, &[a.clone(), a.clone()])),
        "R1" => {
            let ab = cat(&w.prefix, &[a.clone(), b.clone()]);
            let ba = cat(&w.prefix, &[b.clone(), a.clone()]);
            match &w.segment {
                None => ts.contains(&ab) != ts.contains(&ba),
                Some(t) => {
                    ts.contains(&ab)
                        && ts.contains(&ba)
                        && ts.contains(&cat(&ab, t.symbols())) != ts.contains(&cat(&ba, t.symbols()))
                }
            }
        }
        "R2" => {
            let Some(t) = &w.segment else { return false };
            let ab = cat(&w.prefix, &[a.clone(), b.clone()]);
            let ba = cat(&w.prefix, &[b.clone(), a.clone()]);
            ts.contains(&ab)
                && ts.contains(&ba)
                && ts.contains(&cat(&ab, t.symbols())) != ts.contains(&cat(&ba, t.symbols()))
        }
        "R2'" => {
            let Some(t) = &w.segment else { return false };
            let abt = cat(&cat(&w.prefix, &[a.clone(), b.clone()]), t.symbols());
            let bat = cat(&cat(&w.prefix, &[b.clone(), a.clone()]), t.symbols());
            if !ts.contains(&abt) || !ts.contains(&bat) {
                return false;
            }
            let side = dirs(ts, a);
            ts.alphabet().iter().any(|c| {
                dirs(ts, c) == side
                    && ts.contains(&extended(&abt, c))
                    && !ts.contains(&extended(&bat, c))
            })
        }
        "R3'" | "R3''" | "R3'''" => {
            let sa = cat(&w.prefix, &[a.clone()]);
            let disables = ts.contains(&sa)
                && ts.contains(&cat(&w.prefix, &[b.clone()]))
                && !ts.contains(&extended(&sa, b));
            let (ai, bi) = (dirs(ts, a), dirs(ts, b));
            let graded = match rule {
                "R3'" => true,
                "R3''" => !(ai && bi),
                _ => ai != bi,
            };
            disables && graded
        }
        _ => unreachable!("unknown rule {rule}"),
    }
}

fn rules_case(ts: &TraceStructure, report: &RuleReport, bad: &mut Vec<String>) -> Option<()> {
    let t10 = enum_set(ts, RULE_LEN, RULE_CAP)?;
    let (d_any, d_output, d_mixed) = brute_disables(ts, &t10);
    let brute_fails = [
        ("R0", brute_r0(&t10)),
        ("R1", brute_r1(ts, &t10)),
        ("R2", brute_r2(ts, &t10)),
        ("R2'", brute_r2_prime(ts, &t10)),
        ("R3'", d_any),
        ("R3''", d_output),
        ("R3'''", d_mixed),
    ];
    for (rule, brute_violated) in brute_fails {
        let outcome = report.rule(rule);
        if outcome.holds && brute_violated {
            bad.push(format!("{rule} claimed to hold; the bounded scan found a violation"));
        }
        if !outcome.holds {
            let Some(w) = outcome.witnesses.first() else {
                bad.push(format!("{rule} fails without a witness"));
                continue;
            };
            if !witness_replays(ts, rule, w) {
                bad.push(format!("{rule} witness does not replay: {w:?}"));
            }
        }
    }
    let base = report.rule("R0").holds && report.rule("R1").holds && report.rule("R2'").holds;
    if report.di != (base && report.rule("R3'''").holds) {
        bad.push("the verdict is not the conjunction of its rules".into());
    }
    let class_name = report.class.map(|c| c.to_string());
    let expect = if !base {
        None
    } else if report.rule("R3'").holds {
        Some("synchronization".to_string())
    } else if report.rule("R3''").holds {
        Some("data-communication".to_string())
    } else if report.rule("R3'''").holds {
        Some("arbitration".to_string())
    } else {
        None
    };
    if class_name != expect {
        bad.push(format!("class {class_name:?} does not follow the rule grading"));
    }
    Some(())
}

/// Runs the rule oracle over `cases` random prefix-closed structures.
/// Returns how many cases were checked and every disagreement found.
pub fn run_rules_oracle(cases: usize) -> (usize, Vec<String>) {
    let mut gen = Gen::new(0xCAB1E);
    let mut checked = 0;
    let mut drawn = 0;
    let mut bad = Vec::new();
    while checked < cases {
        drawn += 1;
        assert!(drawn < cases * 40, "too many redraws; loosen the caps");
        let universe = gen.universe();
        let ts = gen.structure(&universe, true);
        ts.validate_circuit_spec().expect("generated specs are circuit specs");
        let report = check_all(&ts);
        let mut case_bad = Vec::new();
        if rules_case(&ts, &report, &mut case_bad).is_none() {
            continue;
        }
        for b in case_bad {
            bad.push(format!("case {drawn}: {b}"));
        }
        checked += 1;
    }
    (checked, bad)
}

// Algebraic law suites, run through an explicit proptest runner so any
// includer can invoke them with its own case count. Equality below is
// structural: equal alphabets and language-equal canonical acceptors.

const SYMS: [&str; 4] = ["a", "b", "c", "d"];

/// Everything needed to build one structure deterministically.
#[derive(Debug, Clone)]
struct Raw {
    nsyms: usize,
    dirs: [bool; 4],
    states: usize,
    cells: Vec<Option<usize>>,
    accepting: Vec<bool>,
    prefix_closed: bool,
}

fn arb_raw(prefix_closed: bool) -> impl Strategy<Value = Raw> {
    (1usize..=4, any::<[bool; 4]>(), 1usize..=6).prop_flat_map(move |(nsyms, dirs, states)| {
        (
            proptest::collection::vec(proptest::option::weighted(0.45, 0..states), states * nsyms),
            proptest::collection::vec(any::<bool>(), states),
        )
            .prop_map(move |(cells, accepting)| Raw {
                nsyms,
                dirs,
                states,
                cells,
                accepting,
                prefix_closed,
            })
    })
}

fn build(raw: &Raw) -> TraceStructure {
    let syms: Vec<Symbol> = SYMS[..raw.nsyms].iter().map(|s| Symbol::new(*s).unwrap()).collect();
    let mut transitions = Vec::new();
    for q in 0..raw.states {
        for (i, s) in syms.iter().enumerate() {
            if let Some(r) = raw.cells[q * raw.nsyms + i] {
                transitions.push((q, s.clone(), r));
            }
        }
    }
    let accepting: Vec<usize> = if raw.prefix_closed {
        (0..raw.states).collect()
    } else {
        (0..raw.states).filter(|&q| raw.accepting[q]).collect()
    };
    let alphabet: BTreeSet<Symbol> = syms.iter().cloned().collect();
    let set =
        RegularTraceSet::from_parts(alphabet, raw.states, 0, accepting, transitions).unwrap();
    let inputs =
        syms.iter().enumerate().filter(|&(i, _)| raw.dirs[i]).map(|(_, s)| s.clone()).collect();
    let outputs =
        syms.iter().enumerate().filter(|&(i, _)| !raw.dirs[i]).map(|(_, s)| s.clone()).collect();
    TraceStructure::new(inputs, outputs, set).unwrap()
}

fn arb_structure(prefix_closed: bool) -> impl Strategy<Value = TraceStructure> {
    arb_raw(prefix_closed).prop_map(|raw| build(&raw))
}

/// Operands sharing one direction map, so unions stay well-formed.
fn compatible_triple() -> impl Strategy<Value = (TraceStructure, TraceStructure, TraceStructure)> {
    (arb_raw(false), arb_raw(false), arb_raw(false)).prop_map(|(a, mut b, mut c)| {
        b.dirs = a.dirs;
        c.dirs = a.dirs;
        (build(&a), build(&b), build(&c))
    })
}

fn mask(alphabet: &BTreeSet<Symbol>, bits: [bool; 4]) -> BTreeSet<Symbol> {
    alphabet
        .iter()
        .filter(|s| {
            let i = SYMS.iter().position(|n| *n == s.as_str()).unwrap();
            bits[i]
        })
        .cloned()
        .collect()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn union_laws(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&compatible_triple(), |(r, s, t)| {
            prop_assert!(r.union(&s).equals(&s.union(&r)));
            prop_assert!(r.union(&s).union(&t).equals(&r.union(&s.union(&t))));
            prop_assert!(r.union(&r).equals(&r));
            Ok(())
        })
        .map_err(|e| format!("union laws: {e}"))
}

pub fn weave_laws(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(arb_structure(false), arb_structure(false), arb_structure(false)),
            |(r, s, t)| {
                prop_assert!(r.weave(&s).equals(&s.weave(&r)));
                prop_assert!(r.weave(&s).weave(&t).equals(&r.weave(&s.weave(&t))));
                Ok(())
            },
        )
        .map_err(|e| format!("weave laws: {e}"))
}

pub fn pref_law(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&arb_structure(false), |r| {
            let once = r.pref();
            prop_assert!(once.pref().equals(&once));
            prop_assert!(once.is_prefix_closed());
            Ok(())
        })
        .map_err(|e| format!("pref law: {e}"))
}

pub fn reflect_law(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&arb_structure(false), |r| {
            prop_assert!(r.reflect().reflect().equals(&r));
            Ok(())
        })
        .map_err(|e| format!("reflect law: {e}"))
}

pub fn projection_laws(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(compatible_triple(), any::<[bool; 4]>(), any::<[bool; 4]>()),
            |((r, s, _), first, second)| {
                // Projecting onto the full alphabet changes nothing.
                prop_assert!(r.project(&r.alphabet()).equals(&r));

                // Successive projections compose by intersection.
                let a = mask(&r.alphabet(), first);
                let b = mask(&r.alphabet(), second);
                let both: BTreeSet<Symbol> = a.intersection(&b).cloned().collect();
                prop_assert!(r.project(&a).project(&b).equals(&r.project(&both)));

                // Projection distributes over union.
                prop_assert!(r.union(&s).project(&a).equals(&r.project(&a).union(&s.project(&a))));
                Ok(())
            },
        )
        .map_err(|e| format!("projection laws: {e}"))
}

pub fn rule_reflection_law(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&arb_structure(true), |r| {
            let here = check_all(&r);
            let there = check_all(&r.reflect());
            // Direction-symmetric rules; R3'' grades inputs only and may flip.
            for rule in ["R0", "R1", "R2", "R2'", "R3'", "R3'''"] {
                prop_assert_eq!(here.rule(rule).holds, there.rule(rule).holds, "{}", rule);
            }
            prop_assert_eq!(here.di, there.di);
            Ok(())
        })
        .map_err(|e| format!("rule reflection law: {e}"))
}
