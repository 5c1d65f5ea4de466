//! Canonical finite acceptors for regular trace sets.
//!
//! A trace set is held as a partial deterministic acceptor. A missing
//! transition stands for the one dead sink ("no continuation of this trace is
//! in the set"); minimization folds all dead behavior into that absence.
//!
//! Canonical form, used for structural language equality:
//! - minimal: no two states accept the same residual language;
//! - trimmed: every state is reachable from the initial state and can reach
//!   an accepting state (exception: the empty language keeps one bare,
//!   non-accepting initial state);
//! - numbered by breadth-first discovery from the initial state, following
//!   symbols sorted by name; the initial state is 0.
//!
//! Every constructor and operation returns canonical values, so two values
//! denote the same language exactly when their states, accepting sets, and
//! transition tables coincide (the declared alphabet may differ; unused
//! symbols never influence the canonical form).

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::TraceError;
use crate::trace::{Symbol, Trace};

/// Default maximum length accepted by [`RegularTraceSet::enumerate`].
pub const DEFAULT_ENUMERATION_BOUND: usize = 12;

/// A regular set of traces over a declared alphabet, in canonical acceptor
/// form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularTraceSet {
    alphabet: BTreeSet<Symbol>,
    states: usize,
    initial: usize,
    accepting: BTreeSet<usize>,
    transitions: BTreeMap<usize, BTreeMap<Symbol, usize>>,
}

/// Working form: a dense (possibly partial, possibly redundant) deterministic
/// machine over an explicit symbol table. Only canonicalization consumes it.
pub(crate) struct Dense {
    pub syms: Vec<Symbol>,
    pub delta: Vec<Vec<Option<usize>>>,
    pub acc: Vec<bool>,
    pub init: usize,
}

impl RegularTraceSet {
    /// The empty language.
    pub fn empty(alphabet: BTreeSet<Symbol>) -> Self {
        RegularTraceSet {
            alphabet,
            states: 1,
            initial: 0,
            accepting: BTreeSet::new(),
            transitions: BTreeMap::new(),
        }
    }

    /// The language `{ε}`.
    pub fn epsilon(alphabet: BTreeSet<Symbol>) -> Self {
        RegularTraceSet {
            alphabet,
            states: 1,
            initial: 0,
            accepting: [0].into(),
            transitions: BTreeMap::new(),
        }
    }

    /// The language `{s}`.
    pub fn single_symbol(alphabet: BTreeSet<Symbol>, s: Symbol) -> Self {
        debug_assert!(alphabet.contains(&s));
        RegularTraceSet {
            alphabet,
            states: 2,
            initial: 0,
            accepting: [1].into(),
            transitions: [(0, [(s, 1)].into())].into(),
        }
    }

    /// Builds from raw parts (e.g. deserialized), validating determinism and
    /// symbol membership, then canonicalizes.
    pub fn from_parts(
        alphabet: BTreeSet<Symbol>,
        states: usize,
        initial: usize,
        accepting: Vec<usize>,
        transitions: Vec<(usize, Symbol, usize)>,
    ) -> Result<Self, TraceError> {
        if states == 0 {
            return Err(TraceError::Malformed("an acceptor needs at least one state".into()));
        }
        if initial >= states {
            return Err(TraceError::Malformed(format!(
                "initial state {initial} out of range (states: {states})"
            )));
        }
        for &q in &accepting {
            if q >= states {
                return Err(TraceError::Malformed(format!(
                    "accepting state {q} out of range (states: {states})"
                )));
            }
        }
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let col: BTreeMap<&Symbol, usize> = syms.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut delta = vec![vec![None; syms.len()]; states];
        for (q, s, r) in &transitions {
            if *q >= states || *r >= states {
                return Err(TraceError::Malformed(format!(
                    "transition ({q}, {s}, {r}) out of range (states: {states})"
                )));
            }
            let Some(&c) = col.get(s) else {
                return Err(TraceError::SymbolOutsideAlphabet(s.as_str().to_string()));
            };
            match delta[*q][c] {
                None => delta[*q][c] = Some(*r),
                Some(prev) if prev == *r => {}
                Some(prev) => {
                    return Err(TraceError::Malformed(format!(
                        "nondeterministic on ({q}, {s}): goes to both {prev} and {r}"
                    )))
                }
            }
        }
        let mut acc = vec![false; states];
        for q in accepting {
            acc[q] = true;
        }
        Ok(canonicalize(alphabet, &Dense { syms, delta, acc, init: initial }))
    }

    /// The set containing exactly the given traces.
    pub fn from_traces(alphabet: &BTreeSet<Symbol>, traces: &[Trace]) -> Result<Self, TraceError> {
        for t in traces {
            for s in t.symbols() {
                if !alphabet.contains(s) {
                    return Err(TraceError::SymbolOutsideAlphabet(s.as_str().to_string()));
                }
            }
        }
        // Build a trie.
        let mut next: Vec<BTreeMap<Symbol, usize>> = vec![BTreeMap::new()];
        let mut acc = vec![false];
        for t in traces {
            let mut q = 0;
            for s in t.symbols() {
                q = match next[q].get(s) {
                    Some(&r) => r,
                    None => {
                        next.push(BTreeMap::new());
                        acc.push(false);
                        let r = next.len() - 1;
                        next[q].insert(s.clone(), r);
                        r
                    }
                };
            }
            acc[q] = true;
        }
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let col: BTreeMap<&Symbol, usize> = syms.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let delta = next
            .iter()
            .map(|row| {
                let mut cells = vec![None; syms.len()];
                for (s, &r) in row {
                    cells[col[s]] = Some(r);
                }
                cells
            })
            .collect();
        Ok(canonicalize(alphabet.clone(), &Dense { syms, delta, acc, init: 0 }))
    }

    /// Replaces the declared alphabet; fails if a transition uses a symbol
    /// outside the new alphabet. The canonical shape is unaffected.
    pub fn with_alphabet(self, alphabet: BTreeSet<Symbol>) -> Result<Self, TraceError> {
        for row in self.transitions.values() {
            for s in row.keys() {
                if !alphabet.contains(s) {
                    return Err(TraceError::SymbolOutsideAlphabet(s.as_str().to_string()));
                }
            }
        }
        Ok(RegularTraceSet { alphabet, ..self })
    }

    pub fn alphabet(&self) -> &BTreeSet<Symbol> {
        &self.alphabet
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting.contains(&q)
    }

    /// All transitions as `(from, symbol, to)`, sorted.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, &Symbol, usize)> + '_ {
        self.transitions
            .iter()
            .flat_map(|(&q, row)| row.iter().map(move |(s, &r)| (q, s, r)))
    }

    /// The live continuations of state `q`, sorted by symbol.
    pub fn successors(&self, q: usize) -> impl Iterator<Item = (&Symbol, usize)> + '_ {
        self.transitions
            .get(&q)
            .into_iter()
            .flat_map(|row| row.iter().map(|(s, &r)| (s, r)))
    }

    pub fn successor(&self, q: usize, s: &Symbol) -> Option<usize> {
        self.transitions.get(&q).and_then(|row| row.get(s)).copied()
    }

    /// Runs a word from `from`; `None` means the word left the live part.
    pub fn run(&self, from: usize, word: &[Symbol]) -> Option<usize> {
        let mut q = from;
        for s in word {
            q = self.successor(q, s)?;
        }
        Some(q)
    }

    pub fn contains(&self, t: &Trace) -> bool {
        self.run(self.initial, t.symbols())
            .is_some_and(|q| self.accepting.contains(&q))
    }

    pub fn is_empty_language(&self) -> bool {
        self.accepting.is_empty()
    }

    /// A trimmed canonical acceptor is prefix-closed exactly when every state
    /// accepts (the empty language is prefix-closed too).
    pub fn is_prefix_closed(&self) -> bool {
        self.is_empty_language() || self.accepting.len() == self.states
    }

    /// Members of length ≤ `n`, shortest first, lexicographic within a
    /// length. Uses the default length bound.
    pub fn enumerate(&self, n: usize) -> Result<Vec<Trace>, TraceError> {
        self.enumerate_with(n, DEFAULT_ENUMERATION_BOUND, None)
    }

    /// `enumerate` with an explicit length bound and an optional cap on the
    /// number of live prefixes visited.
    pub fn enumerate_with(
        &self,
        n: usize,
        bound: usize,
        cap: Option<usize>,
    ) -> Result<Vec<Trace>, TraceError> {
        if n > bound {
            return Err(TraceError::BoundExceeded { requested: n, bound });
        }
        let cap = cap.unwrap_or(usize::MAX);
        let mut out = Vec::new();
        let mut frontier: VecDeque<(Trace, usize)> = VecDeque::new();
        frontier.push_back((Trace::empty(), self.initial));
        let mut visited = 0usize;
        while let Some((t, q)) = frontier.pop_front() {
            visited += 1;
            if visited > cap {
                return Err(TraceError::TooManyTraces { cap });
            }
            if self.accepting.contains(&q) {
                out.push(t.clone());
            }
            if t.len() == n {
                continue;
            }
            if let Some(row) = self.transitions.get(&q) {
                for (s, &r) in row {
                    let mut ext = t.clone();
                    ext.push(s.clone());
                    frontier.push_back((ext, r));
                }
            }
        }
        Ok(out)
    }

    /// The lexicographically least shortest word leading from the initial
    /// state to `q`. Every canonical state is reachable, so this always
    /// succeeds for `q < states`.
    pub fn shortest_prefix_reaching(&self, q: usize) -> Trace {
        assert!(q < self.states, "state {q} out of range");
        let mut prev: Vec<Option<(usize, Symbol)>> = vec![None; self.states];
        let mut seen = vec![false; self.states];
        let mut queue = VecDeque::new();
        seen[self.initial] = true;
        queue.push_back(self.initial);
        while let Some(p) = queue.pop_front() {
            if p == q {
                break;
            }
            if let Some(row) = self.transitions.get(&p) {
                for (s, &r) in row {
                    if !seen[r] {
                        seen[r] = true;
                        prev[r] = Some((p, s.clone()));
                        queue.push_back(r);
                    }
                }
            }
        }
        let mut rev = Vec::new();
        let mut cur = q;
        while cur != self.initial {
            let (p, s) = prev[cur].clone().expect("canonical states are reachable");
            rev.push(s);
            cur = p;
        }
        rev.reverse();
        Trace::from_symbols(rev)
    }

    /// The shortest trace accepted by exactly one of the two sets (ties
    /// broken lexicographically over the united alphabet); `None` when the
    /// languages are equal.
    pub fn shortest_difference(&self, other: &Self) -> Option<Trace> {
        let syms: Vec<Symbol> = self
            .alphabet
            .union(&other.alphabet)
            .cloned()
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut queue = VecDeque::new();
        let start = (Some(self.initial), Some(other.initial));
        seen.insert(start);
        queue.push_back((start, Trace::empty()));
        let acc = |set: &Self, q: Option<usize>| q.is_some_and(|q| set.accepting.contains(&q));
        while let Some(((x, y), t)) = queue.pop_front() {
            if acc(self, x) != acc(other, y) {
                return Some(t);
            }
            for s in &syms {
                let nx = x.and_then(|q| self.successor(q, s));
                let ny = y.and_then(|q| other.successor(q, s));
                if nx.is_none() && ny.is_none() {
                    continue;
                }
                if seen.insert((nx, ny)) {
                    let mut nt = t.clone();
                    nt.push(s.clone());
                    queue.push_back(((nx, ny), nt));
                }
            }
        }
        None
    }

    /// Language equality, independent of the declared alphabets.
    pub fn language_eq(&self, other: &Self) -> bool {
        self.states == other.states
            && self.accepting == other.accepting
            && self.transitions == other.transitions
    }

    pub fn union(&self, other: &Self) -> Self {
        product(self, other, |a, b| a || b)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        product(self, other, |a, b| a && b)
    }

    /// `{uv | u ∈ self, v ∈ other}`.
    pub fn concat(&self, other: &Self) -> Self {
        let alphabet: BTreeSet<Symbol> = self.alphabet.union(&other.alphabet).cloned().collect();
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let da = self.to_dense_over(&syms);
        let db = other.to_dense_over(&syms);
        let na = da.acc.len();
        let nb = db.acc.len();
        let mut nfa = Nfa::new(na + nb, syms.len());
        copy_into_nfa(&mut nfa, &da, 0);
        copy_into_nfa(&mut nfa, &db, na);
        for q in 0..na {
            if da.acc[q] {
                nfa.eps[q].push(na + db.init);
            }
        }
        for q in 0..nb {
            nfa.acc[na + q] = db.acc[q];
        }
        nfa.init = da.init;
        canonicalize(alphabet, &nfa.determinize(syms))
    }

    /// Kleene closure: all finite (possibly empty) concatenations.
    pub fn star(&self) -> Self {
        let syms: Vec<Symbol> = self.alphabet.iter().cloned().collect();
        let d = self.to_dense_over(&syms);
        let n = d.acc.len();
        let start = n;
        let mut nfa = Nfa::new(n + 1, syms.len());
        copy_into_nfa(&mut nfa, &d, 0);
        nfa.eps[start].push(d.init);
        for q in 0..n {
            if d.acc[q] {
                nfa.eps[q].push(start);
            }
        }
        nfa.acc[start] = true;
        nfa.init = start;
        canonicalize(self.alphabet.clone(), &nfa.determinize(syms))
    }

    /// All prefixes of members.
    pub fn pref(&self) -> Self {
        if self.is_empty_language() {
            return self.clone();
        }
        // Canonical form is trimmed, so every state lies on a path to an
        // accepting state: prefix-closure just accepts everywhere.
        let syms: Vec<Symbol> = self.alphabet.iter().cloned().collect();
        let mut d = self.to_dense_over(&syms);
        d.acc = vec![true; d.acc.len()];
        canonicalize(self.alphabet.clone(), &d)
    }

    /// Deletes symbols outside `keep` from every member; the alphabet is
    /// intersected with `keep`.
    pub fn project(&self, keep: &BTreeSet<Symbol>) -> Self {
        let alphabet: BTreeSet<Symbol> = self.alphabet.intersection(keep).cloned().collect();
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let col: BTreeMap<&Symbol, usize> = syms.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut nfa = Nfa::new(self.states, syms.len());
        for (q, s, r) in self.transitions() {
            match col.get(s) {
                Some(&c) => nfa.delta[q].push((c, r)),
                None => nfa.eps[q].push(r),
            }
        }
        for &q in &self.accepting {
            nfa.acc[q] = true;
        }
        nfa.init = self.initial;
        canonicalize(alphabet, &nfa.determinize(syms))
    }

    /// Weave over the declared alphabets: traces over the union whose
    /// projections onto each operand's alphabet are members there. Symbols in
    /// both alphabets step both machines; private symbols step their owner.
    pub fn weave(&self, other: &Self) -> Self {
        let alphabet: BTreeSet<Symbol> = self.alphabet.union(&other.alphabet).cloned().collect();
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let da = self.to_dense_over(&syms);
        let db = other.to_dense_over(&syms);
        let in_a: Vec<bool> = syms.iter().map(|s| self.alphabet.contains(s)).collect();
        let in_b: Vec<bool> = syms.iter().map(|s| other.alphabet.contains(s)).collect();
        let na = da.acc.len();
        let nb = db.acc.len();
        let idx = |qa: usize, qb: usize| qa * (nb + 1) + qb;
        let total = (na + 1) * (nb + 1);
        let mut delta = vec![vec![None; syms.len()]; total];
        let mut acc = vec![false; total];
        for qa in 0..=na {
            for qb in 0..=nb {
                let i = idx(qa, qb);
                acc[i] = qa < na && da.acc[qa] && qb < nb && db.acc[qb];
                for (c, _) in syms.iter().enumerate() {
                    let ra = if !in_a[c] {
                        qa
                    } else if qa < na {
                        da.delta[qa][c].unwrap_or(na)
                    } else {
                        na
                    };
                    let rb = if !in_b[c] {
                        qb
                    } else if qb < nb {
                        db.delta[qb][c].unwrap_or(nb)
                    } else {
                        nb
                    };
                    delta[i][c] = Some(idx(ra, rb));
                }
            }
        }
        canonicalize(
            alphabet,
            &Dense { syms, delta, acc, init: idx(da.init, db.init) },
        )
    }

    /// Complement relative to `alphabet`*; requires the declared alphabet to
    /// be contained in `alphabet`.
    pub fn complement_over(&self, alphabet: &BTreeSet<Symbol>) -> Self {
        debug_assert!(self.alphabet.is_subset(alphabet));
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let d = self.to_dense_over(&syms);
        let n = d.acc.len();
        let sink = n;
        let mut delta = vec![vec![None; syms.len()]; n + 1];
        let mut acc = vec![false; n + 1];
        for q in 0..n {
            acc[q] = !d.acc[q];
            for c in 0..syms.len() {
                delta[q][c] = Some(d.delta[q][c].unwrap_or(sink));
            }
        }
        acc[sink] = true;
        for c in 0..syms.len() {
            delta[sink][c] = Some(sink);
        }
        canonicalize(alphabet.clone(), &Dense { syms, delta, acc, init: d.init })
    }

    /// Applies a symbol mapping (already checked injective by the caller) and
    /// re-canonicalizes, since numbering depends on symbol order.
    pub(crate) fn rename(&self, apply: &dyn Fn(&Symbol) -> Symbol) -> Self {
        let alphabet: BTreeSet<Symbol> = self.alphabet.iter().map(|s| apply(s)).collect();
        let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
        let col: BTreeMap<&Symbol, usize> = syms.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut delta = vec![vec![None; syms.len()]; self.states];
        for (q, s, r) in self.transitions() {
            delta[q][col[&apply(s)]] = Some(r);
        }
        let mut acc = vec![false; self.states];
        for &q in &self.accepting {
            acc[q] = true;
        }
        canonicalize(alphabet, &Dense { syms, delta, acc, init: self.initial })
    }

    pub(crate) fn to_dense_over(&self, syms: &[Symbol]) -> Dense {
        let col: BTreeMap<&Symbol, usize> = syms.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut delta = vec![vec![None; syms.len()]; self.states];
        for (q, s, r) in self.transitions() {
            let c = *col.get(s).expect("dense symbol table covers used symbols");
            delta[q][c] = Some(r);
        }
        let mut acc = vec![false; self.states];
        for &q in &self.accepting {
            acc[q] = true;
        }
        Dense { syms: syms.to_vec(), delta, acc, init: self.initial }
    }
}

fn product(
    a: &RegularTraceSet,
    b: &RegularTraceSet,
    accept: impl Fn(bool, bool) -> bool,
) -> RegularTraceSet {
    let alphabet: BTreeSet<Symbol> = a.alphabet.union(&b.alphabet).cloned().collect();
    let syms: Vec<Symbol> = alphabet.iter().cloned().collect();
    let da = a.to_dense_over(&syms);
    let db = b.to_dense_over(&syms);
    let na = da.acc.len();
    let nb = db.acc.len();
    let idx = |qa: usize, qb: usize| qa * (nb + 1) + qb;
    let total = (na + 1) * (nb + 1);
    let mut delta = vec![vec![None; syms.len()]; total];
    let mut acc = vec![false; total];
    for qa in 0..=na {
        for qb in 0..=nb {
            let i = idx(qa, qb);
            let aa = qa < na && da.acc[qa];
            let ab = qb < nb && db.acc[qb];
            acc[i] = accept(aa, ab);
            for c in 0..syms.len() {
                let ra = if qa < na { da.delta[qa][c].unwrap_or(na) } else { na };
                let rb = if qb < nb { db.delta[qb][c].unwrap_or(nb) } else { nb };
                delta[i][c] = Some(idx(ra, rb));
            }
        }
    }
    canonicalize(alphabet, &Dense { syms, delta, acc, init: idx(da.init, db.init) })
}

struct Nfa {
    delta: Vec<Vec<(usize, usize)>>,
    eps: Vec<Vec<usize>>,
    acc: Vec<bool>,
    init: usize,
    nsym: usize,
}

impl Nfa {
    fn new(states: usize, nsym: usize) -> Self {
        Nfa {
            delta: vec![Vec::new(); states],
            eps: vec![Vec::new(); states],
            acc: vec![false; states],
            init: 0,
            nsym,
        }
    }

    fn closure(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = set.clone();
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(q) = stack.pop() {
            for &r in &self.eps[q] {
                if out.insert(r) {
                    stack.push(r);
                }
            }
        }
        out
    }

    /// Subset construction into a dense deterministic machine.
    fn determinize(&self, syms: Vec<Symbol>) -> Dense {
        let start = self.closure(&[self.init].into());
        let mut ids: HashMap<BTreeSet<usize>, usize> = HashMap::new();
        let mut order: Vec<BTreeSet<usize>> = Vec::new();
        ids.insert(start.clone(), 0);
        order.push(start);
        let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
        let mut acc: Vec<bool> = Vec::new();
        let mut head = 0;
        while head < order.len() {
            let cur = order[head].clone();
            head += 1;
            acc.push(cur.iter().any(|&q| self.acc[q]));
            let mut row = vec![None; self.nsym];
            for (c, cell) in row.iter_mut().enumerate() {
                let mut moved = BTreeSet::new();
                for &q in &cur {
                    for &(sc, r) in &self.delta[q] {
                        if sc == c {
                            moved.insert(r);
                        }
                    }
                }
                if moved.is_empty() {
                    continue;
                }
                let closed = self.closure(&moved);
                let next_id = ids.len();
                let id = *ids.entry(closed.clone()).or_insert_with(|| {
                    order.push(closed);
                    next_id
                });
                *cell = Some(id);
            }
            delta.push(row);
        }
        Dense { syms, delta, acc, init: 0 }
    }
}

fn copy_into_nfa(nfa: &mut Nfa, d: &Dense, offset: usize) {
    for (q, row) in d.delta.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Some(r) = cell {
                nfa.delta[offset + q].push((c, offset + r));
            }
        }
    }
}

/// Trim, minimize, and renumber into canonical form.
pub(crate) fn canonicalize(alphabet: BTreeSet<Symbol>, d: &Dense) -> RegularTraceSet {
    let n = d.acc.len();
    let nsym = d.syms.len();

    let mut reach = vec![false; n];
    let mut queue = VecDeque::new();
    reach[d.init] = true;
    queue.push_back(d.init);
    while let Some(q) = queue.pop_front() {
        for c in 0..nsym {
            if let Some(r) = d.delta[q][c] {
                if !reach[r] {
                    reach[r] = true;
                    queue.push_back(r);
                }
            }
        }
    }

    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for q in 0..n {
        for c in 0..nsym {
            if let Some(r) = d.delta[q][c] {
                rev[r].push(q);
            }
        }
    }
    let mut live = vec![false; n];
    let mut queue = VecDeque::new();
    for q in 0..n {
        if d.acc[q] {
            live[q] = true;
            queue.push_back(q);
        }
    }
    while let Some(q) = queue.pop_front() {
        for &p in &rev[q] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }

    if !live[d.init] {
        return RegularTraceSet::empty(alphabet);
    }

    // Compact to the trimmed sub-machine plus an explicit sink.
    let keep: Vec<usize> = (0..n).filter(|&q| reach[q] && live[q]).collect();
    let idx: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let m = keep.len();
    let sink = m;
    let mut delta = vec![vec![sink; nsym]; m + 1];
    let mut acc = vec![false; m + 1];
    for (i, &q) in keep.iter().enumerate() {
        acc[i] = d.acc[q];
        for c in 0..nsym {
            if let Some(r) = d.delta[q][c] {
                if reach[r] && live[r] {
                    delta[i][c] = idx[&r];
                }
            }
        }
    }

    // Moore partition refinement; the sink ends up alone in its class since
    // every kept state accepts some word.
    let mut class: Vec<usize> = acc.iter().map(|&a| usize::from(a)).collect();
    let mut count = class.iter().collect::<BTreeSet<_>>().len();
    loop {
        let mut sig_ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut next = Vec::with_capacity(m + 1);
        for q in 0..=m {
            let sig = (class[q], (0..nsym).map(|c| class[delta[q][c]]).collect::<Vec<_>>());
            let fresh = sig_ids.len();
            next.push(*sig_ids.entry(sig).or_insert(fresh));
        }
        let new_count = sig_ids.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let sink_class = class[sink];

    // Canonical breadth-first numbering over classes, symbols in sorted
    // order (the symbol table is sorted by construction).
    let mut rep: HashMap<usize, usize> = HashMap::new();
    for q in (0..=m).rev() {
        rep.insert(class[q], q);
    }
    let init_class = class[idx[&d.init]];
    let mut number: HashMap<usize, usize> = HashMap::new();
    let mut order = vec![init_class];
    number.insert(init_class, 0);
    let mut head = 0;
    while head < order.len() {
        let c = order[head];
        head += 1;
        let r = rep[&c];
        for s in 0..nsym {
            let tc = class[delta[r][s]];
            if tc != sink_class && !number.contains_key(&tc) {
                number.insert(tc, order.len());
                order.push(tc);
            }
        }
    }

    let mut transitions: BTreeMap<usize, BTreeMap<Symbol, usize>> = BTreeMap::new();
    let mut accepting = BTreeSet::new();
    for (&c, &i) in &number {
        let r = rep[&c];
        if acc[r] {
            accepting.insert(i);
        }
        for s in 0..nsym {
            let tc = class[delta[r][s]];
            if tc != sink_class {
                transitions.entry(i).or_default().insert(d.syms[s].clone(), number[&tc]);
            }
        }
    }

    RegularTraceSet {
        alphabet,
        states: order.len(),
        initial: 0,
        accepting,
        transitions,
    }
}
