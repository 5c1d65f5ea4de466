//! A small library of named circuit specifications and worked networks.
//!
//! The first seven are the standard delay-insensitive building blocks; each
//! is written in the specification language and elaborated on demand, either
//! directly or through [`make`] with caller-chosen port names. The gate
//! fixtures describe plain combinational gates at the event level; they are
//! deliberately not delay-insensitive and serve as negative examples for the
//! rule checkers. The builders at the end wire two worked simulator
//! networks: the Q element between its handshake environments and a token
//! ring of allocator stages.

use std::collections::BTreeSet;

use crate::compose::Decomposition;
use crate::error::TraceError;
use crate::lang::parse_structure;
use crate::sim::{ArbitrationPolicy, Channel, DelayModel, LevelGateKind, Network, Node};
use crate::trace::{set_of, Symbol, TraceStructure};
use crate::RegularTraceSet;

/// `pref *[a?;b!]`: repeats one input then one output.
pub fn wire() -> TraceStructure {
    parse_structure("pref *[a?;b!]").unwrap()
}

/// `pref *[b!;a?]`: a wire that begins by sending.
pub fn iwire() -> TraceStructure {
    parse_structure("pref *[b!;a?]").unwrap()
}

/// `pref *[a?;b!||c!]`: one input fans out to two outputs.
pub fn fork() -> TraceStructure {
    parse_structure("pref *[a?;b!||c!]").unwrap()
}

/// `pref *[a?||b?;c!]`: the output waits for both inputs.
pub fn celement() -> TraceStructure {
    parse_structure("pref *[a?||b?;c!]").unwrap()
}

/// `pref *[a?;b!;a?;c!]`: alternates its two outputs.
pub fn toggle() -> TraceStructure {
    parse_structure("pref *[a?;b!;a?;c!]").unwrap()
}

/// `pref *[(a?|b?);c!]`: either input produces the output; the inputs
/// exclude each other.
pub fn merge() -> TraceStructure {
    parse_structure("pref *[(a?|b?);c!]").unwrap()
}

/// Grants `p!` after `a?` and `q!` after `b?`, but never both grants inside
/// one `n?` round: the environment meters rounds and the two grants contend.
pub fn sequencer() -> TraceStructure {
    parse_structure("pref *[a?;p!] || pref *[b?;q!] || pref *[n?;(p!|q!)]").unwrap()
}

/// The seven named building blocks of the specification library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PrimitiveKind {
    Wire,
    Iwire,
    Fork,
    CElement,
    Toggle,
    Merge,
    Sequencer,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 7] = [
        PrimitiveKind::Wire,
        PrimitiveKind::Iwire,
        PrimitiveKind::Fork,
        PrimitiveKind::CElement,
        PrimitiveKind::Toggle,
        PrimitiveKind::Merge,
        PrimitiveKind::Sequencer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Wire => "wire",
            PrimitiveKind::Iwire => "iwire",
            PrimitiveKind::Fork => "fork",
            PrimitiveKind::CElement => "celement",
            PrimitiveKind::Toggle => "toggle",
            PrimitiveKind::Merge => "merge",
            PrimitiveKind::Sequencer => "sequencer",
        }
    }

    pub fn from_name(name: &str) -> Option<PrimitiveKind> {
        PrimitiveKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// The specification text the kind elaborates.
    pub fn text(self) -> &'static str {
        match self {
            PrimitiveKind::Wire => "pref *[a?;b!]",
            PrimitiveKind::Iwire => "pref *[b!;a?]",
            PrimitiveKind::Fork => "pref *[a?;b!||c!]",
            PrimitiveKind::CElement => "pref *[a?||b?;c!]",
            PrimitiveKind::Toggle => "pref *[a?;b!;a?;c!]",
            PrimitiveKind::Merge => "pref *[(a?|b?);c!]",
            PrimitiveKind::Sequencer => "pref *[a?;p!] || pref *[b?;q!] || pref *[n?;(p!|q!)]",
        }
    }

    /// Port names in the order [`make`] expects them: the defaults from
    /// [`text`](Self::text), inputs before the outputs they trigger. The
    /// sequencer lists its two request/grant pairs and then the round
    /// input `n`.
    pub fn default_ports(self) -> &'static [&'static str] {
        match self {
            PrimitiveKind::Wire | PrimitiveKind::Iwire => &["a", "b"],
            PrimitiveKind::Fork
            | PrimitiveKind::CElement
            | PrimitiveKind::Toggle
            | PrimitiveKind::Merge => &["a", "b", "c"],
            PrimitiveKind::Sequencer => &["a", "p", "b", "q", "n"],
        }
    }

    pub fn arity(self) -> usize {
        self.default_ports().len()
    }

    /// The structure over the default port names.
    pub fn structure(self) -> TraceStructure {
        match self {
            PrimitiveKind::Wire => wire(),
            PrimitiveKind::Iwire => iwire(),
            PrimitiveKind::Fork => fork(),
            PrimitiveKind::CElement => celement(),
            PrimitiveKind::Toggle => toggle(),
            PrimitiveKind::Merge => merge(),
            PrimitiveKind::Sequencer => sequencer(),
        }
    }
}

/// Builds a primitive over caller-chosen port names, which replace the
/// defaults positionally. Port names must be distinct and match the kind's
/// arity.
pub fn make(kind: PrimitiveKind, ports: &[&str]) -> Result<TraceStructure, TraceError> {
    let defaults = kind.default_ports();
    if ports.len() != defaults.len() {
        return Err(TraceError::InvalidPorts(format!(
            "{} takes {} ports, got {}",
            kind.name(),
            defaults.len(),
            ports.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for p in ports {
        if !seen.insert(*p) {
            return Err(TraceError::InvalidPorts(format!(
                "duplicate port name {p:?}"
            )));
        }
    }
    let pairs: Vec<(&str, &str)> = defaults.iter().copied().zip(ports.iter().copied()).collect();
    renamed(&kind.structure(), &pairs)
}

/// One allocator stage of the token-ring story: a local client (`a1`/`p1`)
/// and a forwarded request (`b`, answered by `q` either directly or after a
/// round trip through `p1`/`a0`).
pub fn alloc() -> TraceStructure {
    parse_structure("pref *[a1?;p1!;a0?;p0!] || pref *[b?;(q!|p1!;a0?;q!)]").unwrap()
}

/// Every named specification, with the expression it elaborates.
pub fn table() -> Vec<(&'static str, &'static str, TraceStructure)> {
    PrimitiveKind::ALL
        .into_iter()
        .map(|k| (k.name(), k.text(), k.structure()))
        .collect()
}

/// Event-level behavior of a two-input AND gate with inputs `a`, `b` and
/// output `c`.
pub fn and_gate_events() -> TraceStructure {
    gate_events(|a, b| a && b)
}

/// Event-level behavior of a two-input OR gate with inputs `a`, `b` and
/// output `c`.
pub fn or_gate_events() -> TraceStructure {
    gate_events(|a, b| a || b)
}

/// Event traces of a level gate `c = f(a, b)` with an output delay line.
///
/// All levels start low. An input event toggles its level; whenever that
/// flips the value of `f`, one output transition is queued. The output
/// event fires one queued transition. At most two transitions may be queued
/// (a full pulse); environments that push further are outside the behavior.
/// A momentary input pulse therefore queues two output events, which is
/// exactly the glitch that makes a bare gate sensitive to input order.
fn gate_events(f: impl Fn(bool, bool) -> bool) -> TraceStructure {
    let (a, b, c) = (sym("a"), sym("b"), sym("c"));
    // State: (a level, b level, queued output transitions), row-major.
    let idx = |av: bool, bv: bool, p: usize| usize::from(av) * 6 + usize::from(bv) * 3 + p;
    let mut transitions = Vec::new();
    for av in [false, true] {
        for bv in [false, true] {
            for p in 0..3usize {
                let q = idx(av, bv, p);
                let np = p + usize::from(f(!av, bv) != f(av, bv));
                if np <= 2 {
                    transitions.push((q, a.clone(), idx(!av, bv, np)));
                }
                let np = p + usize::from(f(av, !bv) != f(av, bv));
                if np <= 2 {
                    transitions.push((q, b.clone(), idx(av, !bv, np)));
                }
                if p >= 1 {
                    transitions.push((q, c.clone(), idx(av, bv, p - 1)));
                }
            }
        }
    }
    let traces = RegularTraceSet::from_parts(
        set_of(&["a", "b", "c"]),
        12,
        0,
        (0..12).collect(),
        transitions,
    )
    .unwrap();
    TraceStructure::new(set_of(&["a", "b"]), set_of(&["c"]), traces).unwrap()
}

fn sym(s: &str) -> Symbol {
    Symbol::new(s).expect("fixed name")
}

/// Renames a structure by parallel name pairs; a helper for building
/// instances of the named specifications. Panics on invalid names, so use
/// it only with fixed tables.
pub fn renamed(base: &TraceStructure, pairs: &[(&str, &str)]) -> Result<TraceStructure, TraceError> {
    let mapping = pairs
        .iter()
        .map(|(from, to)| Ok((Symbol::new(*from)?, Symbol::new(*to)?)))
        .collect::<Result<_, TraceError>>()?;
    base.rename(&mapping)
}

/// Renames every listed symbol of `base` to `name_index`.
fn suffixed(base: &TraceStructure, names: &[&str], index: usize) -> TraceStructure {
    let pairs: Vec<(String, String)> = names
        .iter()
        .map(|n| (n.to_string(), format!("{n}_{index}")))
        .collect();
    let refs: Vec<(&str, &str)> = pairs.iter().map(|(f, t)| (f.as_str(), t.as_str())).collect();
    renamed(base, &refs).expect("fixed names")
}

/// Delay assignment for [`q_element_network_with`]. Channel knobs name the
/// wire they time; `link` covers the four handshake wires between the
/// element and its environments. Every knob defaults to a fixed delay of
/// one time unit.
#[derive(Debug, Clone)]
pub struct QElementConfig {
    pub x1_branch: DelayModel,
    pub x2_branch: DelayModel,
    pub y1_branch: DelayModel,
    pub y2_branch: DelayModel,
    pub u_to_a: DelayModel,
    pub u_to_b: DelayModel,
    pub link: DelayModel,
    pub env_response: DelayModel,
    pub a_response: DelayModel,
    pub b_response: DelayModel,
    pub c_response: DelayModel,
}

impl Default for QElementConfig {
    fn default() -> Self {
        let one = DelayModel::fixed(1);
        QElementConfig {
            x1_branch: one.clone(),
            x2_branch: one.clone(),
            y1_branch: one.clone(),
            y2_branch: one.clone(),
            u_to_a: one.clone(),
            u_to_b: one.clone(),
            link: one.clone(),
            env_response: one.clone(),
            a_response: one.clone(),
            b_response: one.clone(),
            c_response: one,
        }
    }
}

/// The Q element between its two handshake environments, with unit delays.
///
/// Automaton `X` drives the left handshake (`xi` out, `xo` back) and `Y`
/// answers the right one (`yo` in, `yi` back). Inside the element the
/// C-level gate `C` joins the fork copies `x2` and `y2` into the state wire
/// `u`; gate `A` computes `yo = x1 and not u`, gate `B` computes
/// `xo = not y1 and u`. The `xi` and `yi` forks are flagged isochronic:
/// each straight branch must win its race against the loop through `C`,
/// or a gate sees the `u` change before the input change that caused it.
/// The `u` wire itself fans out to `A` and `B` unconstrained.
pub fn q_element_network() -> Network {
    q_element_network_with(&QElementConfig::default())
}

/// [`q_element_network`] with every delay chosen by the caller.
pub fn q_element_network_with(cfg: &QElementConfig) -> Network {
    let nodes = vec![
        Node::automaton("X", parse_structure("pref *[xi!;xo?]").expect("fixed text"))
            .with_response(cfg.env_response.clone()),
        Node::automaton("Y", parse_structure("pref *[yo?;yi!]").expect("fixed text"))
            .with_response(cfg.env_response.clone()),
        Node::fork("fx", "xi", &["x1", "x2"]).isochronic(None),
        Node::fork("fy", "yi", &["y1", "y2"]).isochronic(None),
        Node::gate("C", LevelGateKind::CLevel, ["x2", "y2"], "u")
            .with_response(cfg.c_response.clone()),
        Node::gate("A", LevelGateKind::And, ["x1", "u"], "yo")
            .inverting("u")
            .with_response(cfg.a_response.clone()),
        Node::gate("B", LevelGateKind::And, ["y1", "u"], "xo")
            .inverting("y1")
            .with_response(cfg.b_response.clone()),
    ];
    let channels = vec![
        Channel::new(("X", "xi"), ("fx", "xi"), cfg.link.clone()),
        Channel::new(("fx", "x1"), ("A", "x1"), cfg.x1_branch.clone()),
        Channel::new(("fx", "x2"), ("C", "x2"), cfg.x2_branch.clone()),
        Channel::new(("A", "yo"), ("Y", "yo"), cfg.link.clone()),
        Channel::new(("Y", "yi"), ("fy", "yi"), cfg.link.clone()),
        Channel::new(("fy", "y1"), ("B", "y1"), cfg.y1_branch.clone()),
        Channel::new(("fy", "y2"), ("C", "y2"), cfg.y2_branch.clone()),
        Channel::new(("C", "u"), ("A", "u"), cfg.u_to_a.clone()),
        Channel::new(("C", "u"), ("B", "u"), cfg.u_to_b.clone()),
        Channel::new(("B", "xo"), ("X", "xo"), cfg.link.clone()),
    ];
    Network::new(nodes, channels, vec![]).expect("element wiring is consistent")
}

/// The allocator stage `index` of the token ring: its specification and the
/// five-part decomposition that implements it. All symbols carry the stage
/// index as a `_index` suffix.
///
/// The parts are a sequencer (the stage's arbiter), an iwire that keeps the
/// standing pass-the-token request `rq1` raised, two wires that fan the
/// client's release `a0` into the reply `p0` and the token release `q0`,
/// and a merge that funnels both token exits onto `q`. The symbols `a0`
/// and `q1` are each read by two parts, so the strict decomposition mode
/// flags exactly those as fan-out.
pub fn token_ring_alloc(index: usize) -> (TraceStructure, Decomposition) {
    let spec = suffixed(&alloc(), &["a1", "p1", "a0", "p0", "b", "q"], index);
    let n = |base: &str| format!("{base}_{index}");
    let seq = renamed(
        &sequencer(),
        &[
            ("a", &n("a1")),
            ("p", &n("p1")),
            ("b", &n("rq1")),
            ("q", &n("q1")),
            ("n", &n("b")),
        ],
    )
    .expect("fixed names");
    let iw = renamed(&iwire(), &[("a", &n("q1")), ("b", &n("rq1"))]).expect("fixed names");
    let wp = renamed(&wire(), &[("a", &n("a0")), ("b", &n("p0"))]).expect("fixed names");
    let wq = renamed(&wire(), &[("a", &n("a0")), ("b", &n("q0"))]).expect("fixed names");
    let mg = renamed(
        &merge(),
        &[("a", &n("q1")), ("b", &n("q0")), ("c", &n("q"))],
    )
    .expect("fixed names");
    let d = Decomposition::new(
        spec.clone(),
        vec![
            (format!("sequencer_{index}"), seq),
            (format!("iwire_{index}"), iw),
            (format!("wire_p_{index}"), wp),
            (format!("wire_q_{index}"), wq),
            (format!("merge_{index}"), mg),
        ],
    )
    .expect("parts are valid circuit specifications");
    (spec, d)
}

/// Knobs for [`token_ring_with`]. The machine schedule is its response
/// delay: fixed for a periodic client, uniform for a seeded-random one.
/// Machines listed in `idle_machines` never raise a request.
#[derive(Debug, Clone)]
pub struct RingConfig {
    pub machine_response: DelayModel,
    pub part_response: DelayModel,
    pub channel_delay: DelayModel,
    pub idle_machines: BTreeSet<usize>,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            machine_response: DelayModel::uniform(1, 4),
            part_response: DelayModel::fixed(1),
            channel_delay: DelayModel::fixed(1),
            idle_machines: BTreeSet::new(),
        }
    }
}

/// The machine served by stage `index`: it raises `a1`, waits for the
/// grant `p1`, releases with `a0` and waits for the reply `p0`. An idle
/// machine has the same ports but never speaks.
fn machine_stub(index: usize, idle: bool) -> TraceStructure {
    if !idle {
        return parse_structure(&format!(
            "pref *[a1_{index}!;p1_{index}?;a0_{index}!;p0_{index}?]"
        ))
        .expect("fixed text");
    }
    let names = ["a1", "a0", "p1", "p0"]
        .map(|b| Symbol::new(&format!("{b}_{index}")).expect("fixed name"));
    let traces = RegularTraceSet::from_parts(
        names.iter().cloned().collect(),
        1,
        0,
        (0..1).collect(),
        vec![],
    )
    .expect("one silent state");
    TraceStructure::new(
        names[2..].iter().cloned().collect(),
        names[..2].iter().cloned().collect(),
        traces,
    )
    .expect("disjoint alphabets")
}

/// A ring of `n` allocator stages built from their five-part
/// decompositions, one machine stub per stage, and a token injector
/// closing the ring from stage `n-1` back to stage 0.
///
/// The injector behaves as an iwire: it emits the single token once and
/// thereafter only relays it, so exactly one token circulates. Stage
/// arbiters run first-come-first-served, which keeps every pending request
/// ahead of the standing pass request once its grant is possible.
pub fn token_ring(n: usize) -> Network {
    token_ring_with(n, &RingConfig::default())
}

/// [`token_ring`] with every delay and machine schedule chosen by the
/// caller.
pub fn token_ring_with(n: usize, cfg: &RingConfig) -> Network {
    assert!(n >= 1, "a ring needs at least one stage");
    let mut nodes = Vec::new();
    let mut channels = Vec::new();
    for i in 0..n {
        let (_, d) = token_ring_alloc(i);
        let part = |k: usize| d.parts()[k].1.clone();
        let id = |base: &str| format!("{base}{i}");
        let port = |base: &str| format!("{base}_{i}");
        nodes.push(
            Node::automaton(&id("seq"), part(0))
                .with_policy(ArbitrationPolicy::Fifo)
                .with_response(cfg.part_response.clone()),
        );
        nodes.push(Node::automaton(&id("iw"), part(1)).with_response(cfg.part_response.clone()));
        nodes.push(Node::automaton(&id("wp"), part(2)).with_response(cfg.part_response.clone()));
        nodes.push(Node::automaton(&id("wq"), part(3)).with_response(cfg.part_response.clone()));
        nodes.push(Node::automaton(&id("mg"), part(4)).with_response(cfg.part_response.clone()));
        nodes.push(
            Node::automaton(&id("mach"), machine_stub(i, cfg.idle_machines.contains(&i)))
                .with_response(cfg.machine_response.clone()),
        );
        let mut ch = |src: (&str, &str), snk: (&str, &str)| {
            channels.push(Channel::new(src, snk, cfg.channel_delay.clone()));
        };
        ch((&id("mach"), &port("a1")), (&id("seq"), &port("a1")));
        ch((&id("seq"), &port("p1")), (&id("mach"), &port("p1")));
        ch((&id("mach"), &port("a0")), (&id("wp"), &port("a0")));
        ch((&id("mach"), &port("a0")), (&id("wq"), &port("a0")));
        ch((&id("wp"), &port("p0")), (&id("mach"), &port("p0")));
        ch((&id("iw"), &port("rq1")), (&id("seq"), &port("rq1")));
        ch((&id("seq"), &port("q1")), (&id("iw"), &port("q1")));
        ch((&id("seq"), &port("q1")), (&id("mg"), &port("q1")));
        ch((&id("wq"), &port("q0")), (&id("mg"), &port("q0")));
    }
    for i in 0..n - 1 {
        channels.push(Channel::new(
            (format!("mg{i}").as_str(), format!("q_{i}").as_str()),
            (format!("seq{}", i + 1).as_str(), format!("b_{}", i + 1).as_str()),
            cfg.channel_delay.clone(),
        ));
    }
    nodes.push(
        Node::automaton("token", parse_structure("pref *[tq!;tb?]").expect("fixed text"))
            .with_response(cfg.part_response.clone()),
    );
    channels.push(Channel::new(
        ("token", "tq"),
        ("seq0", "b_0"),
        cfg.channel_delay.clone(),
    ));
    channels.push(Channel::new(
        (format!("mg{}", n - 1).as_str(), format!("q_{}", n - 1).as_str()),
        ("token", "tb"),
        cfg.channel_delay.clone(),
    ));
    Network::new(nodes, channels, vec![]).expect("ring wiring is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Trace;

    fn w(s: &str) -> Trace {
        Trace::from_word(s).unwrap()
    }

    #[test]
    fn all_named_specifications_are_circuit_specs() {
        for (name, _, s) in table() {
            s.validate_circuit_spec()
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        alloc().validate_circuit_spec().unwrap();
        and_gate_events().validate_circuit_spec().unwrap();
        or_gate_events().validate_circuit_spec().unwrap();
    }

    #[test]
    fn toggle_alternates_outputs() {
        let t = toggle();
        assert!(t.contains(&w("abac")));
        assert!(t.contains(&w("abacab")));
        assert!(!t.contains(&w("abab")));
        assert!(!t.contains(&w("ac")));
    }

    #[test]
    fn merge_inputs_exclude_each_other() {
        let m = merge();
        assert!(m.contains(&w("ac")));
        assert!(m.contains(&w("bc")));
        assert!(m.contains(&w("acbc")));
        assert!(!m.contains(&w("ab")));
        assert!(!m.contains(&w("ba")));
    }

    #[test]
    fn sequencer_grants_once_per_round() {
        let s = sequencer();
        assert_eq!(s.inputs(), &set_of(&["a", "b", "n"]));
        assert_eq!(s.outputs(), &set_of(&["p", "q"]));
        assert!(s.contains(&w("anp")));
        assert!(s.contains(&w("bnq")));
        assert!(s.contains(&w("abnpnq")));
        assert!(s.contains(&w("abnqnp")));
        // One n admits one grant.
        assert!(!s.contains(&w("abnpq")));
        // A grant needs its request.
        assert!(!s.contains(&w("np")));
        assert!(!s.contains(&w("anq")));
    }

    #[test]
    fn alloc_grants_the_client_only_inside_a_token_round() {
        let al = alloc();
        assert_eq!(al.inputs(), &set_of(&["a0", "a1", "b"]));
        assert_eq!(al.outputs(), &set_of(&["p0", "p1", "q"]));
        // The token passes straight through when it is not claimed.
        assert!(al.contains(&Trace::from_names(["b", "q"]).unwrap()));
        // p1 and a0 are shared by both operands: the client's critical
        // section sits inside the token round.
        assert!(al.contains(&Trace::from_names(["a1", "b", "p1", "a0", "q", "p0"]).unwrap()));
        assert!(al.contains(&Trace::from_names(["b", "a1", "p1", "a0", "p0", "q"]).unwrap()));
        // No grant without the token.
        assert!(!al.contains(&Trace::from_names(["a1", "p1"]).unwrap()));
        // No grant without the client's request.
        assert!(!al.contains(&Trace::from_names(["b", "p1"]).unwrap()));
    }

    #[test]
    fn and_gate_queues_a_pulse() {
        let g = and_gate_events();
        // Raising b then lowering a mid-flight queues a full output pulse.
        assert!(g.contains(&w("abac")));
        assert!(g.contains(&w("abacc")));
        // Without a change of the gate value no output is queued.
        assert!(!g.contains(&w("aabc")));
        assert!(!g.contains(&w("c")));
        // Order sensitivity: ab then ba end in different states.
        assert!(g.contains(&w("ab")));
        assert!(g.contains(&w("ba")));
    }

    #[test]
    fn or_gate_fires_on_first_input() {
        let g = or_gate_events();
        assert!(g.contains(&w("ac"))); // one raised input already flips f
        assert!(g.contains(&w("abc"))); // the second input queues nothing more
        assert!(!g.contains(&w("abcc")));
        assert!(g.contains(&w("aacc"))); // an input pulse queues an output pulse
        assert!(!g.contains(&w("aaa"))); // the queue holds at most a full pulse
        assert!(!g.contains(&w("c")));
    }

    #[test]
    fn renamed_builds_instances() {
        let left = renamed(&wire(), &[("a", "x"), ("b", "y")]).unwrap();
        assert_eq!(left.inputs(), &set_of(&["x"]));
        assert_eq!(left.outputs(), &set_of(&["y"]));
        assert!(left.contains(&w("xy")));
    }

    #[test]
    fn make_builds_instances_with_chosen_ports() {
        let t = make(PrimitiveKind::Toggle, &["x", "y", "z"]).unwrap();
        assert!(t.contains(&w("xy"))); // the first input goes to the second port
        assert!(!t.contains(&w("xz")));
        let iw = make(PrimitiveKind::Iwire, &["a", "b"]).unwrap();
        assert!(iw.contains(&w("b"))); // begins by sending
        let f = make(PrimitiveKind::Fork, &["a", "b", "c"]).unwrap();
        assert!(f.contains(&w("abc")));
        assert!(f.contains(&w("acb")));
    }

    #[test]
    fn make_agrees_with_the_table_on_default_ports() {
        for kind in PrimitiveKind::ALL {
            let built = make(kind, kind.default_ports()).unwrap();
            let elaborated = kind.structure();
            assert_eq!(built.inputs(), elaborated.inputs(), "{}", kind.name());
            assert_eq!(built.outputs(), elaborated.outputs(), "{}", kind.name());
            assert_eq!(
                built.traces().shortest_difference(elaborated.traces()),
                None,
                "{}",
                kind.name()
            );
            assert_eq!(PrimitiveKind::from_name(kind.name()), Some(kind));
            assert_eq!(kind.arity(), kind.default_ports().len());
        }
    }

    #[test]
    fn make_rejects_bad_port_lists() {
        assert!(matches!(
            make(PrimitiveKind::Wire, &["a"]),
            Err(TraceError::InvalidPorts(_))
        ));
        assert!(matches!(
            make(PrimitiveKind::Fork, &["a", "b", "b"]),
            Err(TraceError::InvalidPorts(_))
        ));
        assert!(make(PrimitiveKind::Wire, &["1bad", "b"]).is_err());
    }

    #[test]
    fn the_sequencer_part_is_a_renamed_sequencer() {
        let inst = make(PrimitiveKind::Sequencer, &["a1", "p1", "rq1", "q1", "b"]).unwrap();
        let composite =
            parse_structure("pref *[a1?;p1!] || pref *[rq1?;q1!] || pref *[b?;(p1!|q1!)]")
                .unwrap();
        assert_eq!(inst.inputs(), composite.inputs());
        assert_eq!(inst.outputs(), composite.outputs());
        assert_eq!(inst.traces().shortest_difference(composite.traces()), None);
        // And it is literally the first part of every allocator stage.
        let (_, d) = token_ring_alloc(7);
        let stage_arbiter = &d.parts()[0].1;
        let renamed_inst =
            make(PrimitiveKind::Sequencer, &["a1_7", "p1_7", "rq1_7", "q1_7", "b_7"]).unwrap();
        assert_eq!(
            stage_arbiter
                .traces()
                .shortest_difference(renamed_inst.traces()),
            None
        );
    }

    #[test]
    fn the_allocator_decomposition_passes_and_flags_its_fan_out() {
        use crate::compose::check_decomposition;
        use crate::rules::{check_di, classify, CircuitClass};

        let (spec, d) = token_ring_alloc(0);
        assert!(check_di(&spec));
        assert!(matches!(classify(&spec), Some(CircuitClass::Arbitration)));
        let report = check_decomposition(&d, false);
        assert!(report.holds, "{:?}", report.first_failure);
        let strict = check_decomposition(&d, true);
        assert!(!strict.holds);
        let shared: Vec<&str> = strict
            .shared_inputs
            .iter()
            .map(|s| s.symbol.as_str())
            .collect();
        assert_eq!(shared, ["a0_0", "q1_0"]);
    }

    #[test]
    fn the_q_element_walks_its_canonical_cycle() {
        use crate::sim::{simulate, Edge, Horizon, Time};

        let net = q_element_network();
        let (trace, reports) = simulate(&net, Horizon::Time(Time::from_int(24)), 0);
        assert!(reports.is_empty(), "{reports:?}");
        let seen: Vec<(&str, Edge, Time)> = trace
            .events
            .iter()
            .map(|e| (e.transition.symbol.as_str(), e.transition.edge, e.emit_time))
            .collect();
        let t = Time::from_int;
        assert_eq!(
            seen,
            vec![
                ("xi", Edge::Rise, t(1)),
                ("x1", Edge::Rise, t(2)),
                ("x2", Edge::Rise, t(2)),
                ("yo", Edge::Rise, t(4)),
                ("yi", Edge::Rise, t(6)),
                ("y1", Edge::Rise, t(7)),
                ("y2", Edge::Rise, t(7)),
                ("u", Edge::Rise, t(9)),
                ("u", Edge::Rise, t(9)),
                ("yo", Edge::Fall, t(11)),
                ("yi", Edge::Fall, t(13)),
                ("y1", Edge::Fall, t(14)),
                ("y2", Edge::Fall, t(14)),
                ("xo", Edge::Rise, t(16)),
                ("xi", Edge::Fall, t(18)),
                ("x1", Edge::Fall, t(19)),
                ("x2", Edge::Fall, t(19)),
                ("u", Edge::Fall, t(21)),
                ("u", Edge::Fall, t(21)),
                ("xo", Edge::Fall, t(23)),
            ]
        );
    }

    #[test]
    fn zero_skew_keeps_the_q_element_quiet_under_random_delays() {
        use crate::sim::{simulate, Horizon};

        let cfg = QElementConfig {
            u_to_a: DelayModel::uniform(1, 5),
            u_to_b: DelayModel::uniform(1, 5),
            link: DelayModel::uniform(1, 5),
            env_response: DelayModel::uniform(1, 5),
            a_response: DelayModel::uniform(1, 5),
            b_response: DelayModel::uniform(1, 5),
            c_response: DelayModel::uniform(1, 5),
            ..QElementConfig::default()
        };
        let net = q_element_network_with(&cfg);
        for seed in 0..5 {
            let (trace, reports) = simulate(&net, Horizon::Events(200), seed);
            assert!(reports.is_empty(), "seed {seed}: {reports:?}");
            assert!(trace.events.len() > 150);
        }
    }

    #[test]
    fn injected_fork_skew_cancels_at_gate_b() {
        use crate::sim::{simulate, Horizon, InterferenceKind, Time};

        // y1 loses its race by a hair: u arrives at 10, y1 at 11, and the
        // spurious pending edge would fire at 15. A larger skew would also
        // pile a second edge onto the slow wire, muddying the report.
        let cfg = QElementConfig {
            y1_branch: DelayModel::fixed(4),
            b_response: DelayModel::fixed(5),
            ..QElementConfig::default()
        };
        let net = q_element_network_with(&cfg);
        let (_, reports) = simulate(&net, Horizon::Events(400), 11);
        assert_eq!(reports.len(), 1, "{reports:?}");
        let r = &reports[0];
        assert_eq!(r.kind, InterferenceKind::Computation);
        assert_eq!(r.location, "B");
        assert_eq!(r.time, Time::from_int(11));
        assert_eq!(r.symbol.as_ref().map(|s| s.as_str()), Some("y1"));
    }

    #[test]
    fn a_one_stage_ring_returns_its_token_and_grants_its_machine() {
        use crate::sim::{simulate, Horizon};

        let net = token_ring(1);
        let (trace, reports) = simulate(&net, Horizon::Events(80), 3);
        assert!(reports.is_empty(), "{reports:?}");
        assert!(trace.events.iter().any(|e| e.transition.symbol.as_str() == "q_0"));
        assert!(trace.events.iter().any(|e| e.transition.symbol.as_str() == "p1_0"));
    }

    #[test]
    fn a_three_stage_ring_serves_every_machine() {
        use crate::sim::{simulate, Horizon};

        let net = token_ring(3);
        let (trace, reports) = simulate(&net, Horizon::Events(400), 9);
        assert!(reports.is_empty(), "{reports:?}");
        for i in 0..3 {
            let grant = format!("p1_{i}");
            assert!(
                trace.events.iter().any(|e| e.transition.symbol.as_str() == grant),
                "machine {i} never granted"
            );
        }
        let returns = trace
            .events
            .iter()
            .filter(|e| e.transition.symbol.as_str() == "tq")
            .count();
        assert!(returns >= 2, "token crossed the injector {returns} times");
    }

    #[test]
    fn a_lone_requester_is_granted_within_two_traversals() {
        use crate::sim::{simulate, Horizon};

        let cfg = RingConfig {
            idle_machines: [1, 2].into_iter().collect(),
            ..RingConfig::default()
        };
        let net = token_ring_with(3, &cfg);
        let (trace, reports) = simulate(&net, Horizon::Events(200), 4);
        assert!(reports.is_empty(), "{reports:?}");
        let grant_id = trace
            .events
            .iter()
            .find(|e| e.transition.symbol.as_str() == "p1_0")
            .map(|e| e.id)
            .expect("the requester is granted");
        assert!(!trace.events.iter().any(|e| e.transition.symbol.as_str() == "p1_1"));
        assert!(!trace.events.iter().any(|e| e.transition.symbol.as_str() == "p1_2"));
        let visits_before = trace
            .events
            .iter()
            .filter(|e| e.transition.symbol.as_str() == "tq" && e.id < grant_id)
            .count();
        assert!(visits_before <= 2, "{visits_before} traversals before the grant");
    }
}
