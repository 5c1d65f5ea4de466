//! Deterministic event-driven simulation of component networks.
//!
//! A network is a set of nodes joined by point-to-point channels. Nodes
//! are event automatons (a trace structure run operationally), level gates
//! (AND, OR, XOR, C_LEVEL, LATCH over boolean wire levels), or forks
//! (zero-logic repeaters that copy an incoming transition onto every
//! branch at the same instant). Every wire carries transitions: the level
//! toggles on each event, and an event records both the wire name and the
//! edge sense. Automatons react to occurrences and ignore the sense;
//! gates react to the resulting levels.
//!
//! The loop pops the earliest arrival (ties broken by event id), delivers
//! it, and schedules whatever the receiving node now owes: automaton
//! outputs after the node's response delay, gate output edges when the
//! recomputed value differs from the driven one. All randomness (delay
//! sampling, arbitration) comes from one seeded generator, so a run is a
//! pure function of (network, horizon, seed).
//!
//! Four kinds of violation are reported rather than dropped:
//! computation (an automaton receives a symbol its state cannot accept,
//! or an input edge cancels a gate's still-pending output edge),
//! transmission (a second event emitted on a channel while one is in
//! flight), output (an edge arriving at a wire already at that level, the
//! downstream face of doubled drive), and glitch (a latch data edge
//! racing the enable's falling edge within the configured window).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::TraceError;
use crate::lang;
use crate::switch::latch_next;
use crate::trace::{Symbol, TraceStructure};

/// Abstract simulation time: an exact rational number of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(Ratio<i64>);

impl Time {
    pub fn zero() -> Self {
        Time(Ratio::from_integer(0))
    }

    pub fn from_int(n: i64) -> Self {
        Time(Ratio::from_integer(n))
    }

    /// Panics when `den` is zero.
    pub fn new(num: i64, den: i64) -> Self {
        Time(Ratio::new(num, den))
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn is_positive(&self) -> bool {
        self.0 > Ratio::from_integer(0)
    }
}

impl Default for Time {
    fn default() -> Self {
        Time::zero()
    }
}

impl std::ops::Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        Time(self.0 - rhs.0)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Time {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, TraceError> {
        let bad = || TraceError::Malformed(format!("bad time {s:?}: expected n or n/d"));
        match s.split_once('/') {
            None => Ok(Time::from_int(s.trim().parse().map_err(|_| bad())?)),
            Some((n, d)) => {
                let num: i64 = n.trim().parse().map_err(|_| bad())?;
                let den: i64 = d.trim().parse().map_err(|_| bad())?;
                if den == 0 {
                    return Err(bad());
                }
                Ok(Time::new(num, den))
            }
        }
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Time;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a time as an integer or a \"n/d\" string")
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Time, E> {
                Ok(Time::from_int(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Time, E> {
                i64::try_from(v)
                    .map(Time::from_int)
                    .map_err(|_| E::custom("time out of range"))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Time, E> {
                v.parse().map_err(|e| E::custom(format!("{e}")))
            }
        }
        d.deserialize_any(V)
    }
}

/// How long a channel transit, node response, or arbitration takes.
/// Every sampled value is strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Fixed { d: Time },
    /// Uniform over [lo, hi), sampled on a 1/65536 grid.
    Uniform { lo: Time, hi: Time },
    /// One entry per occurrence; the last entry repeats once exhausted.
    Table { entries: Vec<Time> },
}

impl DelayModel {
    pub fn fixed(n: i64) -> Self {
        DelayModel::Fixed { d: Time::from_int(n) }
    }

    pub fn uniform(lo: i64, hi: i64) -> Self {
        DelayModel::Uniform {
            lo: Time::from_int(lo),
            hi: Time::from_int(hi),
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let ok = match self {
            DelayModel::Fixed { d } => d.is_positive(),
            DelayModel::Uniform { lo, hi } => lo.is_positive() && lo <= hi,
            DelayModel::Table { entries } => {
                !entries.is_empty() && entries.iter().all(Time::is_positive)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(TraceError::NonPositiveDelay(format!("{self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, occurrence: usize) -> Time {
        match self {
            DelayModel::Fixed { d } => *d,
            DelayModel::Uniform { lo, hi } => {
                let k = i64::from(rng.next_u32() & 0xFFFF);
                let span = *hi - *lo;
                Time(lo.0 + span.0 * Ratio::new(k, 65536))
            }
            DelayModel::Table { entries } => entries[occurrence.min(entries.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Rise,
    Fall,
}

impl Edge {
    pub fn level(self) -> bool {
        self == Edge::Rise
    }

    pub fn of_level(level: bool) -> Edge {
        if level {
            Edge::Rise
        } else {
            Edge::Fall
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Edge::Rise => "↑",
            Edge::Fall => "↓",
        }
    }
}

/// One signal transition: the wire's name (the emitting port) and the
/// edge sense the wire takes on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub symbol: Symbol,
    pub edge: Edge,
}

/// One transition in flight on one channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    /// Monotonically increasing in creation order.
    pub id: u64,
    pub channel: String,
    pub transition: Transition,
    pub emit_time: Time,
    /// Always strictly after `emit_time`.
    pub arrival_time: Time,
    /// Ids of earlier-arriving events this emission consumed.
    pub causes: BTreeSet<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceKind {
    Computation,
    Transmission,
    Output,
    Glitch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub kind: InterferenceKind,
    pub time: Time,
    /// Node id for computation and glitch reports, channel id otherwise.
    pub location: String,
    pub involved: Vec<u64>,
    /// Computation reports: the receiver's state when the symbol arrived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    /// Computation reports: the symbol that could not be absorbed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<Symbol>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArbitrationPolicy {
    Random,
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelGateKind {
    And,
    Or,
    Xor,
    CLevel,
    Latch,
}

impl LevelGateKind {
    fn name(self) -> &'static str {
        match self {
            LevelGateKind::And => "and",
            LevelGateKind::Or => "or",
            LevelGateKind::Xor => "xor",
            LevelGateKind::CLevel => "c_level",
            LevelGateKind::Latch => "latch",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "and" => LevelGateKind::And,
            "or" => LevelGateKind::Or,
            "xor" => LevelGateKind::Xor,
            "c_level" => LevelGateKind::CLevel,
            "latch" => LevelGateKind::Latch,
            _ => return None,
        })
    }

    /// `driven` is the currently driven output, which C_LEVEL holds when
    /// its inputs disagree and LATCH holds while the enable is low.
    fn target(self, a: bool, b: bool, driven: bool) -> bool {
        match self {
            LevelGateKind::And => a && b,
            LevelGateKind::Or => a || b,
            LevelGateKind::Xor => a ^ b,
            LevelGateKind::CLevel => {
                if a == b {
                    a
                } else {
                    driven
                }
            }
            LevelGateKind::Latch => latch_next(a, b, driven),
        }
    }
}

/// What a node does with the transitions delivered to it.
#[derive(Debug, Clone)]
pub enum Behavior {
    /// Runs the structure's acceptor; input symbols advance it, enabled
    /// output symbols are emitted autonomously, one at a time.
    Automaton(TraceStructure),
    /// Two-input level gate. `inputs[0]` is the data input of a LATCH and
    /// `inputs[1]` its enable. Members of `inverted` are complemented
    /// before the gate function is applied.
    Gate {
        kind: LevelGateKind,
        inputs: [Symbol; 2],
        inverted: BTreeSet<Symbol>,
        output: Symbol,
    },
    /// Copies each incoming transition onto every output port at the
    /// instant of arrival; branch delays live on the outgoing channels.
    /// `isochronic` and `skew_bound` are declarative: they mark branches
    /// whose skew the design relies on, and are not enforced.
    Fork {
        input: Symbol,
        outputs: Vec<Symbol>,
        isochronic: bool,
        skew_bound: Option<Time>,
    },
}

impl Behavior {
    pub fn input_ports(&self) -> Vec<Symbol> {
        match self {
            Behavior::Automaton(s) => s.inputs().iter().cloned().collect(),
            Behavior::Gate { inputs, .. } => inputs.to_vec(),
            Behavior::Fork { input, .. } => vec![input.clone()],
        }
    }

    pub fn output_ports(&self) -> Vec<Symbol> {
        match self {
            Behavior::Automaton(s) => s.outputs().iter().cloned().collect(),
            Behavior::Gate { output, .. } => vec![output.clone()],
            Behavior::Fork { outputs, .. } => outputs.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub behavior: Behavior,
    /// Delay between an automaton output becoming due and its emission,
    /// or between a gate's input edge and its output edge. Unused by
    /// forks.
    pub response: DelayModel,
    /// Extra delay added when an automaton had to choose between several
    /// enabled outputs.
    pub arbitration: Option<DelayModel>,
    pub policy: ArbitrationPolicy,
}

fn sym(name: &str) -> Symbol {
    Symbol::new(name).expect("valid port name")
}

impl Node {
    /// Panics on invalid port names; network construction validates the
    /// rest.
    pub fn automaton(id: &str, spec: TraceStructure) -> Node {
        Node {
            id: id.to_string(),
            behavior: Behavior::Automaton(spec),
            response: DelayModel::fixed(1),
            arbitration: None,
            policy: ArbitrationPolicy::Random,
        }
    }

    pub fn gate(id: &str, kind: LevelGateKind, inputs: [&str; 2], output: &str) -> Node {
        Node {
            id: id.to_string(),
            behavior: Behavior::Gate {
                kind,
                inputs: [sym(inputs[0]), sym(inputs[1])],
                inverted: BTreeSet::new(),
                output: sym(output),
            },
            response: DelayModel::fixed(1),
            arbitration: None,
            policy: ArbitrationPolicy::Random,
        }
    }

    pub fn fork(id: &str, input: &str, outputs: &[&str]) -> Node {
        Node {
            id: id.to_string(),
            behavior: Behavior::Fork {
                input: sym(input),
                outputs: outputs.iter().map(|o| sym(o)).collect(),
                isochronic: false,
                skew_bound: None,
            },
            response: DelayModel::fixed(1),
            arbitration: None,
            policy: ArbitrationPolicy::Random,
        }
    }

    /// Marks a gate input as complemented. Panics if the behavior is not
    /// a gate.
    pub fn inverting(mut self, input: &str) -> Node {
        match &mut self.behavior {
            Behavior::Gate { inverted, .. } => {
                inverted.insert(sym(input));
            }
            _ => panic!("only gates have inverted inputs"),
        }
        self
    }

    /// Marks a fork's branches as isochronic. Panics if the behavior is
    /// not a fork.
    pub fn isochronic(mut self, bound: Option<Time>) -> Node {
        match &mut self.behavior {
            Behavior::Fork {
                isochronic,
                skew_bound,
                ..
            } => {
                *isochronic = true;
                *skew_bound = bound;
            }
            _ => panic!("only forks are isochronic"),
        }
        self
    }

    pub fn with_response(mut self, d: DelayModel) -> Node {
        self.response = d;
        self
    }

    pub fn with_arbitration(mut self, d: DelayModel) -> Node {
        self.arbitration = Some(d);
        self
    }

    pub fn with_policy(mut self, p: ArbitrationPolicy) -> Node {
        self.policy = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortRef {
    pub node: String,
    pub port: Symbol,
}

impl PortRef {
    pub fn new(node: &str, port: &str) -> PortRef {
        PortRef {
            node: node.to_string(),
            port: sym(port),
        }
    }

    fn parse(s: &str) -> Result<PortRef, TraceError> {
        let (node, port) = s.rsplit_once('.').ok_or_else(|| {
            TraceError::MalformedNetwork(format!("port reference {s:?} is not node.port"))
        })?;
        Ok(PortRef {
            node: node.to_string(),
            port: Symbol::new(port)?,
        })
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

/// A point-to-point wire from one output port to one input port.
#[derive(Debug, Clone)]
pub struct Channel {
    pub id: String,
    pub source: PortRef,
    pub sink: PortRef,
    pub delay: DelayModel,
}

impl Channel {
    pub fn new(source: (&str, &str), sink: (&str, &str), delay: DelayModel) -> Channel {
        let source = PortRef::new(source.0, source.1);
        let sink = PortRef::new(sink.0, sink.1);
        Channel {
            id: format!("{source}->{sink}"),
            source,
            sink,
            delay,
        }
    }
}

/// A scripted external stimulus feeding one input port: one transition
/// emitted at each listed time.
#[derive(Debug, Clone)]
pub struct Driver {
    pub id: String,
    pub sink: PortRef,
    pub times: Vec<Time>,
    pub delay: DelayModel,
}

impl Driver {
    pub fn new(id: &str, sink: (&str, &str), times: Vec<Time>) -> Driver {
        Driver {
            id: id.to_string(),
            sink: PortRef::new(sink.0, sink.1),
            times,
            delay: DelayModel::fixed(1),
        }
    }

    pub fn with_delay(mut self, d: DelayModel) -> Driver {
        self.delay = d;
        self
    }
}

/// A closed component network ready to simulate. Construction validates
/// the wiring: ids unique, every channel endpoint a real port of the
/// right direction, and every input port fed by exactly one channel or
/// driver.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    channels: Vec<Channel>,
    drivers: Vec<Driver>,
}

impl Network {
    pub fn new(
        nodes: Vec<Node>,
        channels: Vec<Channel>,
        drivers: Vec<Driver>,
    ) -> Result<Network, TraceError> {
        let net = Network {
            nodes,
            channels,
            drivers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn drivers(&self) -> &[Driver] {
        &self.drivers
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    fn validate(&self) -> Result<(), TraceError> {
        let err = |m: String| Err(TraceError::MalformedNetwork(m));

        let mut by_id: BTreeMap<&str, &Node> = BTreeMap::new();
        for n in &self.nodes {
            if by_id.insert(&n.id, n).is_some() {
                return err(format!("duplicate node id {:?}", n.id));
            }
            n.response.validate()?;
            if let Some(a) = &n.arbitration {
                a.validate()?;
            }
            let ins = n.behavior.input_ports();
            let outs = n.behavior.output_ports();
            let mut ports = BTreeSet::new();
            for p in ins.iter().chain(outs.iter()) {
                if !ports.insert(p.clone()) {
                    return err(format!("node {:?} declares port {:?} twice", n.id, p));
                }
            }
            match &n.behavior {
                Behavior::Automaton(s) => {
                    s.validate_circuit_spec()?;
                }
                Behavior::Gate { inverted, .. } => {
                    for i in inverted {
                        if !ins.contains(i) {
                            return err(format!(
                                "node {:?} inverts {:?}, which is not one of its inputs",
                                n.id, i
                            ));
                        }
                    }
                }
                Behavior::Fork { outputs, .. } => {
                    if outputs.is_empty() {
                        return err(format!("fork {:?} has no branches", n.id));
                    }
                }
            }
        }

        let mut feeder_ids = BTreeSet::new();
        let mut fed: BTreeMap<(String, Symbol), usize> = BTreeMap::new();
        let mut check_sink = |sink: &PortRef| -> Result<(), TraceError> {
            let node = by_id
                .get(sink.node.as_str())
                .ok_or_else(|| TraceError::MalformedNetwork(format!("unknown node in {sink}")))?;
            if !node.behavior.input_ports().contains(&sink.port) {
                return Err(TraceError::MalformedNetwork(format!(
                    "{sink} is not an input port"
                )));
            }
            *fed.entry((sink.node.clone(), sink.port.clone())).or_insert(0) += 1;
            Ok(())
        };
        for c in &self.channels {
            if !feeder_ids.insert(c.id.clone()) {
                return err(format!("duplicate channel id {:?}", c.id));
            }
            c.delay.validate()?;
            let src = by_id.get(c.source.node.as_str()).ok_or_else(|| {
                TraceError::MalformedNetwork(format!("unknown node in {}", c.source))
            })?;
            if !src.behavior.output_ports().contains(&c.source.port) {
                return err(format!("{} is not an output port", c.source));
            }
            check_sink(&c.sink)?;
        }
        for d in &self.drivers {
            if !feeder_ids.insert(d.id.clone()) {
                return err(format!("duplicate feeder id {:?}", d.id));
            }
            if by_id.contains_key(d.id.as_str()) {
                return err(format!("driver id {:?} collides with a node id", d.id));
            }
            d.delay.validate()?;
            check_sink(&d.sink)?;
        }

        for n in &self.nodes {
            for p in n.behavior.input_ports() {
                match fed.get(&(n.id.clone(), p.clone())).copied().unwrap_or(0) {
                    1 => {}
                    k => {
                        return err(format!(
                            "input port {}.{p} is fed by {k} feeders (need exactly 1)",
                            n.id
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Network, TraceError> {
        let repr: NetRepr = serde_json::from_str(text)
            .map_err(|e| TraceError::MalformedNetwork(format!("netlist JSON: {e}")))?;
        repr.try_into()
    }

    pub fn to_json(&self) -> String {
        let repr = NetRepr::from(self);
        serde_json::to_string_pretty(&repr).expect("netlist serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct NetRepr {
    nodes: Vec<NodeRepr>,
    channels: Vec<ChannelRepr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    drivers: Vec<DriverRepr>,
}

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    structure: Option<TraceStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inputs: Option<Vec<Symbol>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<Symbol>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    inverted: BTreeSet<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<Vec<Symbol>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    isochronic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skew_bound: Option<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<DelayModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arbitration: Option<DelayModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<ArbitrationPolicy>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    from: String,
    to: String,
    delay: DelayModel,
}

#[derive(Serialize, Deserialize)]
struct DriverRepr {
    id: String,
    to: String,
    times: Vec<Time>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay: Option<DelayModel>,
}

impl TryFrom<NetRepr> for Network {
    type Error = TraceError;

    fn try_from(repr: NetRepr) -> Result<Network, TraceError> {
        let mut nodes = Vec::new();
        for n in repr.nodes {
            let behavior = match n.kind.as_str() {
                "automaton" => {
                    let structure = match (n.structure, n.spec.as_deref()) {
                        (Some(s), None) => s,
                        (None, Some(text)) => lang::parse_structure(text)?,
                        _ => {
                            return Err(TraceError::MalformedNetwork(format!(
                                "automaton {:?} needs exactly one of spec or structure",
                                n.id
                            )))
                        }
                    };
                    Behavior::Automaton(structure)
                }
                "fork" => Behavior::Fork {
                    input: n.input.ok_or_else(|| {
                        TraceError::MalformedNetwork(format!("fork {:?} needs input", n.id))
                    })?,
                    outputs: n.outputs.ok_or_else(|| {
                        TraceError::MalformedNetwork(format!("fork {:?} needs outputs", n.id))
                    })?,
                    isochronic: n.isochronic,
                    skew_bound: n.skew_bound,
                },
                other => {
                    let kind = LevelGateKind::from_name(other).ok_or_else(|| {
                        TraceError::MalformedNetwork(format!("unknown node kind {other:?}"))
                    })?;
                    let inputs = n.inputs.ok_or_else(|| {
                        TraceError::MalformedNetwork(format!("gate {:?} needs inputs", n.id))
                    })?;
                    let [a, b]: [Symbol; 2] = inputs.try_into().map_err(|_| {
                        TraceError::MalformedNetwork(format!(
                            "gate {:?} needs exactly two inputs",
                            n.id
                        ))
                    })?;
                    Behavior::Gate {
                        kind,
                        inputs: [a, b],
                        inverted: n.inverted,
                        output: n.output.ok_or_else(|| {
                            TraceError::MalformedNetwork(format!("gate {:?} needs output", n.id))
                        })?,
                    }
                }
            };
            nodes.push(Node {
                id: n.id,
                behavior,
                response: n.response.unwrap_or_else(|| DelayModel::fixed(1)),
                arbitration: n.arbitration,
                policy: n.policy.unwrap_or(ArbitrationPolicy::Random),
            });
        }
        let mut channels = Vec::new();
        for c in repr.channels {
            let source = PortRef::parse(&c.from)?;
            let sink = PortRef::parse(&c.to)?;
            channels.push(Channel {
                id: c.id.unwrap_or_else(|| format!("{source}->{sink}")),
                source,
                sink,
                delay: c.delay,
            });
        }
        let mut drivers = Vec::new();
        for d in repr.drivers {
            drivers.push(Driver {
                id: d.id,
                sink: PortRef::parse(&d.to)?,
                times: d.times,
                delay: d.delay.unwrap_or_else(|| DelayModel::fixed(1)),
            });
        }
        Network::new(nodes, channels, drivers)
    }
}

impl From<&Network> for NetRepr {
    fn from(net: &Network) -> NetRepr {
        let nodes = net
            .nodes
            .iter()
            .map(|n| {
                let mut repr = NodeRepr {
                    id: n.id.clone(),
                    kind: String::new(),
                    spec: None,
                    structure: None,
                    inputs: None,
                    output: None,
                    inverted: BTreeSet::new(),
                    input: None,
                    outputs: None,
                    isochronic: false,
                    skew_bound: None,
                    response: Some(n.response.clone()),
                    arbitration: n.arbitration.clone(),
                    policy: Some(n.policy),
                };
                match &n.behavior {
                    Behavior::Automaton(s) => {
                        repr.kind = "automaton".into();
                        repr.structure = Some(s.clone());
                    }
                    Behavior::Gate {
                        kind,
                        inputs,
                        inverted,
                        output,
                    } => {
                        repr.kind = kind.name().into();
                        repr.inputs = Some(inputs.to_vec());
                        repr.inverted = inverted.clone();
                        repr.output = Some(output.clone());
                    }
                    Behavior::Fork {
                        input,
                        outputs,
                        isochronic,
                        skew_bound,
                    } => {
                        repr.kind = "fork".into();
                        repr.input = Some(input.clone());
                        repr.outputs = Some(outputs.clone());
                        repr.isochronic = *isochronic;
                        repr.skew_bound = *skew_bound;
                    }
                }
                repr
            })
            .collect();
        NetRepr {
            nodes,
            channels: net
                .channels
                .iter()
                .map(|c| ChannelRepr {
                    id: Some(c.id.clone()),
                    from: c.source.to_string(),
                    to: c.sink.to_string(),
                    delay: c.delay.clone(),
                })
                .collect(),
            drivers: net
                .drivers
                .iter()
                .map(|d| DriverRepr {
                    id: d.id.clone(),
                    to: d.sink.to_string(),
                    times: d.times.clone(),
                    delay: Some(d.delay.clone()),
                })
                .collect(),
        }
    }
}

/// The full event log of one run, in emission order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub events: Vec<SimEvent>,
}

impl SimTrace {
    /// One event per line as JSON.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<SimTrace, TraceError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: SimEvent = serde_json::from_str(line)
                .map_err(|e| TraceError::Malformed(format!("event line {}: {e}", i + 1)))?;
            events.push(e);
        }
        Ok(SimTrace { events })
    }
}

/// When to stop: at the first arrival past a time, or after a number of
/// delivered events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Time(Time),
    Events(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnInterference {
    /// Stop at the first computation interference (other kinds always
    /// log and continue).
    Halt,
    /// Log everything and keep going; unexpected symbols are dropped.
    Log,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub on_interference: OnInterference,
    /// Break arrival-time ties randomly instead of by event id, to
    /// spot-check that conclusions do not lean on the serialization.
    pub randomize_ties: bool,
    /// Latch hazard window: a data edge and a falling enable arriving
    /// within this span of each other are reported as a glitch. Zero
    /// means simultaneous arrivals only.
    pub latch_hazard_window: Time,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            on_interference: OnInterference::Halt,
            randomize_ties: false,
            latch_hazard_window: Time::zero(),
        }
    }
}

/// Picks one of several enabled outputs. `pending` pairs each symbol
/// with the stamp of the moment it became enabled and must be sorted by
/// symbol and non-empty; FIFO picks the oldest stamp, random draws from
/// the seeded generator.
pub fn arbitrate(
    pending: &[(Symbol, u64)],
    policy: ArbitrationPolicy,
    rng: &mut impl RngCore,
) -> Symbol {
    assert!(!pending.is_empty(), "arbitrate needs a candidate");
    if pending.len() == 1 {
        return pending[0].0.clone();
    }
    match policy {
        ArbitrationPolicy::Random => {
            let i = rng.next_u32() as usize % pending.len();
            pending[i].0.clone()
        }
        ArbitrationPolicy::Fifo => {
            pending
                .iter()
                .min_by_key(|(s, stamp)| (*stamp, s.clone()))
                .expect("non-empty")
                .0
                .clone()
        }
    }
}

struct FeederState {
    source_level: bool,
    sink_level: bool,
    in_flight: BTreeSet<u64>,
    occurrence: usize,
}

struct AutoState {
    state: usize,
    intent: Option<u64>,
    enabled_since: BTreeMap<Symbol, u64>,
    recent: BTreeSet<u64>,
    resp_occ: usize,
    arb_occ: usize,
}

struct GatePending {
    target: bool,
    stamp: u64,
    causes: BTreeSet<u64>,
}

struct GateState {
    driven: bool,
    pending: Option<GatePending>,
    resp_occ: usize,
    last_data_edge: Option<Time>,
    last_enable_fall: Option<Time>,
}

enum NodeState {
    Auto(AutoState),
    Gate(GateState),
    Fork,
}

#[derive(PartialEq, Eq)]
enum Action {
    Deliver { event: usize },
    AutoFire { node: usize, symbol: Symbol, stamp: u64 },
    GateFire { node: usize, stamp: u64 },
    DriverEmit { feeder: usize },
}

#[derive(PartialEq, Eq)]
struct Entry {
    time: Time,
    tie: u64,
    action: Action,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.tie).cmp(&(other.time, other.tie))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Engine<'n> {
    net: &'n Network,
    options: SimOptions,
    rng: ChaCha8Rng,
    seq: u64,
    queue: BinaryHeap<Reverse<Entry>>,
    feeders: Vec<FeederState>,
    /// Per feeder: id, sink node index, label (source port for channels,
    /// sink port for drivers), delay.
    feeder_meta: Vec<(String, usize, Symbol, DelayModel)>,
    feeder_by_id: HashMap<String, usize>,
    out_channels: HashMap<(usize, Symbol), Vec<usize>>,
    port_feeder: HashMap<(usize, Symbol), usize>,
    states: Vec<NodeState>,
    events: Vec<SimEvent>,
    reports: Vec<InterferenceReport>,
    halted: bool,
}

impl<'n> Engine<'n> {
    fn new(net: &'n Network, seed: u64, options: SimOptions) -> Engine<'n> {
        let node_idx: HashMap<&str, usize> = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut feeders = Vec::new();
        let mut feeder_meta = Vec::new();
        let mut feeder_by_id = HashMap::new();
        let mut out_channels: HashMap<(usize, Symbol), Vec<usize>> = HashMap::new();
        let mut port_feeder = HashMap::new();
        for c in &net.channels {
            let idx = feeders.len();
            feeders.push(FeederState {
                source_level: false,
                sink_level: false,
                in_flight: BTreeSet::new(),
                occurrence: 0,
            });
            let sink_node = node_idx[c.sink.node.as_str()];
            feeder_meta.push((c.id.clone(), sink_node, c.source.port.clone(), c.delay.clone()));
            feeder_by_id.insert(c.id.clone(), idx);
            out_channels
                .entry((node_idx[c.source.node.as_str()], c.source.port.clone()))
                .or_default()
                .push(idx);
            port_feeder.insert((sink_node, c.sink.port.clone()), idx);
        }
        for d in &net.drivers {
            let idx = feeders.len();
            feeders.push(FeederState {
                source_level: false,
                sink_level: false,
                in_flight: BTreeSet::new(),
                occurrence: 0,
            });
            let sink_node = node_idx[d.sink.node.as_str()];
            feeder_meta.push((d.id.clone(), sink_node, d.sink.port.clone(), d.delay.clone()));
            feeder_by_id.insert(d.id.clone(), idx);
            port_feeder.insert((sink_node, d.sink.port.clone()), idx);
        }
        let states = net
            .nodes
            .iter()
            .map(|n| match &n.behavior {
                Behavior::Automaton(s) => NodeState::Auto(AutoState {
                    state: s.traces().initial(),
                    intent: None,
                    enabled_since: BTreeMap::new(),
                    recent: BTreeSet::new(),
                    resp_occ: 0,
                    arb_occ: 0,
                }),
                Behavior::Gate { .. } => NodeState::Gate(GateState {
                    driven: false,
                    pending: None,
                    resp_occ: 0,
                    last_data_edge: None,
                    last_enable_fall: None,
                }),
                Behavior::Fork { .. } => NodeState::Fork,
            })
            .collect();
        Engine {
            net,
            options,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            queue: BinaryHeap::new(),
            feeders,
            feeder_meta,
            feeder_by_id,
            out_channels,
            port_feeder,
            states,
            events: Vec::new(),
            reports: Vec::new(),
            halted: false,
        }
    }

    fn next_seq(&mut self) -> u64 {
        let v = self.seq;
        self.seq += 1;
        v
    }

    fn tie_for(&mut self, default: u64) -> u64 {
        if self.options.randomize_ties {
            self.rng.next_u64()
        } else {
            default
        }
    }

    fn push(&mut self, time: Time, tie: u64, action: Action) {
        self.queue.push(Reverse(Entry { time, tie, action }));
    }

    /// Emits one transition on one feeder. Logs transmission interference
    /// when the wire already carries an event.
    fn emit_on_feeder(&mut self, f: usize, emit_time: Time, causes: BTreeSet<u64>) {
        let delay = {
            let occ = self.feeders[f].occurrence;
            self.feeders[f].occurrence += 1;
            self.feeder_meta[f].3.sample(&mut self.rng, occ)
        };
        let id = self.next_seq();
        let st = &mut self.feeders[f];
        st.source_level = !st.source_level;
        let edge = Edge::of_level(st.source_level);
        if !st.in_flight.is_empty() {
            let mut involved: Vec<u64> = st.in_flight.iter().copied().collect();
            involved.push(id);
            self.reports.push(InterferenceReport {
                kind: InterferenceKind::Transmission,
                time: emit_time,
                location: self.feeder_meta[f].0.clone(),
                involved,
                state: None,
                symbol: None,
            });
        }
        self.feeders[f].in_flight.insert(id);
        let event = SimEvent {
            id,
            channel: self.feeder_meta[f].0.clone(),
            transition: Transition {
                symbol: self.feeder_meta[f].2.clone(),
                edge,
            },
            emit_time,
            arrival_time: emit_time + delay,
            causes,
        };
        let arrival = event.arrival_time;
        let idx = self.events.len();
        self.events.push(event);
        let tie = self.tie_for(id);
        self.push(arrival, tie, Action::Deliver { event: idx });
    }

    /// Emits on every channel leaving (node, port).
    fn emit_port(&mut self, node: usize, port: &Symbol, emit_time: Time, causes: &BTreeSet<u64>) {
        if let Some(chans) = self.out_channels.get(&(node, port.clone())) {
            for f in chans.clone() {
                self.emit_on_feeder(f, emit_time, causes.clone());
            }
        }
    }

    /// Schedules an automaton's next output if one is enabled and no
    /// intent is outstanding.
    fn auto_poll(&mut self, node: usize, now: Time) {
        let spec = match &self.net.nodes[node].behavior {
            Behavior::Automaton(s) => s,
            _ => unreachable!("auto_poll on non-automaton"),
        };
        let (enabled, has_intent) = match &self.states[node] {
            NodeState::Auto(st) => {
                let enabled: Vec<(Symbol, u64)> = spec
                    .traces()
                    .successors(st.state)
                    .filter(|(s, _)| spec.outputs().contains(*s))
                    .map(|(s, _)| (s.clone(), st.enabled_since.get(s).copied().unwrap_or(0)))
                    .collect();
                (enabled, st.intent.is_some())
            }
            _ => unreachable!(),
        };
        if has_intent || enabled.is_empty() {
            return;
        }
        let node_def = &self.net.nodes[node];
        let (symbol, extra) = if enabled.len() == 1 {
            (enabled[0].0.clone(), Time::zero())
        } else {
            let chosen = arbitrate(&enabled, node_def.policy, &mut self.rng);
            let extra = match node_def.arbitration.clone() {
                Some(model) => {
                    let occ = match &mut self.states[node] {
                        NodeState::Auto(st) => {
                            let o = st.arb_occ;
                            st.arb_occ += 1;
                            o
                        }
                        _ => unreachable!(),
                    };
                    model.sample(&mut self.rng, occ)
                }
                None => Time::zero(),
            };
            (chosen, extra)
        };
        let response = node_def.response.clone();
        let occ = match &mut self.states[node] {
            NodeState::Auto(st) => {
                let o = st.resp_occ;
                st.resp_occ += 1;
                o
            }
            _ => unreachable!(),
        };
        let resp = response.sample(&mut self.rng, occ);
        let stamp = self.next_seq();
        match &mut self.states[node] {
            NodeState::Auto(st) => st.intent = Some(stamp),
            _ => unreachable!(),
        }
        let tie = self.tie_for(stamp);
        self.push(now + resp + extra, tie, Action::AutoFire { node, symbol, stamp });
    }

    /// Updates the enabled-output stamps after a state change.
    fn restamp(&mut self, node: usize) {
        let spec = match &self.net.nodes[node].behavior {
            Behavior::Automaton(s) => s,
            _ => unreachable!(),
        };
        let now_enabled: BTreeSet<Symbol> = match &self.states[node] {
            NodeState::Auto(st) => spec
                .traces()
                .successors(st.state)
                .filter(|(s, _)| spec.outputs().contains(*s))
                .map(|(s, _)| s.clone())
                .collect(),
            _ => unreachable!(),
        };
        let mut fresh = Vec::new();
        match &mut self.states[node] {
            NodeState::Auto(st) => {
                st.enabled_since.retain(|s, _| now_enabled.contains(s));
                for s in now_enabled {
                    if !st.enabled_since.contains_key(&s) {
                        fresh.push(s);
                    }
                }
            }
            _ => unreachable!(),
        }
        for s in fresh {
            let stamp = self.next_seq();
            match &mut self.states[node] {
                NodeState::Auto(st) => {
                    st.enabled_since.insert(s, stamp);
                }
                _ => unreachable!(),
            }
        }
    }

    fn effective_level(&self, node: usize, port: &Symbol, inverted: &BTreeSet<Symbol>) -> bool {
        let f = self.port_feeder[&(node, port.clone())];
        self.feeders[f].sink_level ^ inverted.contains(port)
    }

    /// Recomputes a gate after an input change (or at start-up when
    /// `trigger` is empty) and reconciles the pending output edge.
    fn gate_recompute(&mut self, node: usize, now: Time, trigger: BTreeSet<u64>) {
        let (kind, inputs, inverted, response) = match &self.net.nodes[node].behavior {
            Behavior::Gate {
                kind,
                inputs,
                inverted,
                ..
            } => (
                *kind,
                inputs.clone(),
                inverted.clone(),
                self.net.nodes[node].response.clone(),
            ),
            _ => unreachable!("gate_recompute on non-gate"),
        };
        let a = self.effective_level(node, &inputs[0], &inverted);
        let b = self.effective_level(node, &inputs[1], &inverted);
        let (driven, pending_target) = match &self.states[node] {
            NodeState::Gate(st) => (st.driven, st.pending.as_ref().map(|p| p.target)),
            _ => unreachable!(),
        };
        let target = kind.target(a, b, driven);
        match pending_target {
            Some(t) if t == target => {}
            Some(_) => {
                // The input change invalidated a committed output edge.
                let cancelled = match &mut self.states[node] {
                    NodeState::Gate(st) => st.pending.take().expect("pending present"),
                    _ => unreachable!(),
                };
                let mut involved: Vec<u64> = cancelled.causes.iter().copied().collect();
                involved.extend(trigger.iter().copied());
                let symbol = trigger
                    .iter()
                    .next()
                    .and_then(|id| self.events.iter().find(|e| e.id == *id))
                    .map(|e| e.transition.symbol.clone());
                self.reports.push(InterferenceReport {
                    kind: InterferenceKind::Computation,
                    time: now,
                    location: self.net.nodes[node].id.clone(),
                    involved,
                    state: Some(format!(
                        "{}={}, {}={}, pending {} edge cancelled",
                        inputs[0],
                        u8::from(a ^ inverted.contains(&inputs[0])),
                        inputs[1],
                        u8::from(b ^ inverted.contains(&inputs[1])),
                        Edge::of_level(cancelled.target).arrow()
                    )),
                    symbol,
                });
                if self.options.on_interference == OnInterference::Halt {
                    self.halted = true;
                }
            }
            None if target != driven => {
                let occ = match &mut self.states[node] {
                    NodeState::Gate(st) => {
                        let o = st.resp_occ;
                        st.resp_occ += 1;
                        o
                    }
                    _ => unreachable!(),
                };
                let resp = response.sample(&mut self.rng, occ);
                let stamp = self.next_seq();
                match &mut self.states[node] {
                    NodeState::Gate(st) => {
                        st.pending = Some(GatePending {
                            target,
                            stamp,
                            causes: trigger,
                        })
                    }
                    _ => unreachable!(),
                }
                let tie = self.tie_for(stamp);
                self.push(now + resp, tie, Action::GateFire { node, stamp });
            }
            None => {}
        }
    }

    /// Delivers one event to its sink.
    fn deliver(&mut self, ev_idx: usize) {
        let (id, feeder, new_level, arrival) = {
            let ev = &self.events[ev_idx];
            (
                ev.id,
                self.feeder_by_id[&ev.channel],
                ev.transition.edge.level(),
                ev.arrival_time,
            )
        };
        self.feeders[feeder].in_flight.remove(&id);
        if self.feeders[feeder].sink_level == new_level {
            self.reports.push(InterferenceReport {
                kind: InterferenceKind::Output,
                time: arrival,
                location: self.feeder_meta[feeder].0.clone(),
                involved: vec![id],
                state: None,
                symbol: None,
            });
        }
        self.feeders[feeder].sink_level = new_level;

        let node = self.feeder_meta[feeder].1;
        let sink_port = match self.net.channel(&self.feeder_meta[feeder].0) {
            Some(c) => c.sink.port.clone(),
            None => self.feeder_meta[feeder].2.clone(),
        };
        match &self.net.nodes[node].behavior {
            Behavior::Automaton(spec) => {
                let current = match &self.states[node] {
                    NodeState::Auto(st) => st.state,
                    _ => unreachable!(),
                };
                match spec.traces().successor(current, &sink_port) {
                    Some(next) => {
                        match &mut self.states[node] {
                            NodeState::Auto(st) => {
                                st.state = next;
                                st.recent.insert(id);
                            }
                            _ => unreachable!(),
                        }
                        self.restamp(node);
                        self.auto_poll(node, arrival);
                    }
                    None => {
                        self.reports.push(InterferenceReport {
                            kind: InterferenceKind::Computation,
                            time: arrival,
                            location: self.net.nodes[node].id.clone(),
                            involved: vec![id],
                            state: Some(current.to_string()),
                            symbol: Some(sink_port),
                        });
                        if self.options.on_interference == OnInterference::Halt {
                            self.halted = true;
                        }
                    }
                }
            }
            Behavior::Gate { kind, inputs, .. } => {
                if *kind == LevelGateKind::Latch {
                    let window = self.options.latch_hazard_window;
                    let (is_data, is_enable_fall) =
                        (sink_port == inputs[0], sink_port == inputs[1] && !new_level);
                    let race = match (&self.states[node], is_data, is_enable_fall) {
                        (NodeState::Gate(st), true, _) => st
                            .last_enable_fall
                            .is_some_and(|t| arrival - t <= window),
                        (NodeState::Gate(st), _, true) => {
                            st.last_data_edge.is_some_and(|t| arrival - t <= window)
                        }
                        _ => false,
                    };
                    match &mut self.states[node] {
                        NodeState::Gate(st) => {
                            if is_data {
                                st.last_data_edge = Some(arrival);
                            }
                            if is_enable_fall {
                                st.last_enable_fall = Some(arrival);
                            }
                        }
                        _ => unreachable!(),
                    }
                    if race {
                        self.reports.push(InterferenceReport {
                            kind: InterferenceKind::Glitch,
                            time: arrival,
                            location: self.net.nodes[node].id.clone(),
                            involved: vec![id],
                            state: None,
                            symbol: Some(sink_port.clone()),
                        });
                    }
                }
                self.gate_recompute(node, arrival, BTreeSet::from([id]));
            }
            Behavior::Fork { outputs, .. } => {
                for port in outputs.clone() {
                    self.emit_port(node, &port, arrival, &BTreeSet::from([id]));
                }
            }
        }
    }

    fn auto_fire(&mut self, node: usize, symbol: Symbol, stamp: u64, now: Time) {
        let valid = match &self.states[node] {
            NodeState::Auto(st) => st.intent == Some(stamp),
            _ => unreachable!(),
        };
        if !valid {
            return;
        }
        let spec = match &self.net.nodes[node].behavior {
            Behavior::Automaton(s) => s,
            _ => unreachable!(),
        };
        let next = {
            let current = match &self.states[node] {
                NodeState::Auto(st) => st.state,
                _ => unreachable!(),
            };
            spec.traces().successor(current, &symbol)
        };
        match &mut self.states[node] {
            NodeState::Auto(st) => st.intent = None,
            _ => unreachable!(),
        }
        match next {
            Some(next) => {
                let causes = match &mut self.states[node] {
                    NodeState::Auto(st) => {
                        st.state = next;
                        std::mem::take(&mut st.recent)
                    }
                    _ => unreachable!(),
                };
                self.restamp(node);
                self.emit_port(node, &symbol, now, &causes);
                self.auto_poll(node, now);
            }
            None => {
                // A delivery between scheduling and firing disabled the
                // chosen output; pick afresh.
                self.auto_poll(node, now);
            }
        }
    }

    fn gate_fire(&mut self, node: usize, stamp: u64, now: Time) {
        let fire = match &mut self.states[node] {
            NodeState::Gate(st) => match &st.pending {
                Some(p) if p.stamp == stamp => st.pending.take(),
                _ => None,
            },
            _ => unreachable!(),
        };
        let Some(p) = fire else { return };
        match &mut self.states[node] {
            NodeState::Gate(st) => st.driven = p.target,
            _ => unreachable!(),
        }
        let output = match &self.net.nodes[node].behavior {
            Behavior::Gate { output, .. } => output.clone(),
            _ => unreachable!(),
        };
        self.emit_port(node, &output, now, &p.causes);
    }

    fn run(&mut self, horizon: Horizon) {
        // Wake every driver and every node that owes something at rest.
        // Scripted emissions are queued, not emitted, so a wire's
        // in-flight census stays truthful.
        for (d_idx, d) in self.net.drivers.iter().enumerate() {
            let f = self.net.channels.len() + d_idx;
            for t in d.times.clone() {
                let stamp = self.next_seq();
                let tie = self.tie_for(stamp);
                self.push(t, tie, Action::DriverEmit { feeder: f });
            }
        }
        for node in 0..self.net.nodes.len() {
            match &self.net.nodes[node].behavior {
                Behavior::Automaton(_) => {
                    self.restamp(node);
                    self.auto_poll(node, Time::zero());
                }
                Behavior::Gate { .. } => {
                    self.gate_recompute(node, Time::zero(), BTreeSet::new());
                }
                Behavior::Fork { .. } => {}
            }
        }

        let mut delivered = 0usize;
        while let Some(Reverse(entry)) = self.queue.pop() {
            if let Horizon::Time(t) = horizon {
                if entry.time > t {
                    break;
                }
            }
            match entry.action {
                Action::Deliver { event } => {
                    self.deliver(event);
                    delivered += 1;
                    if self.halted {
                        break;
                    }
                    if let Horizon::Events(n) = horizon {
                        if delivered >= n {
                            break;
                        }
                    }
                }
                Action::AutoFire { node, symbol, stamp } => {
                    self.auto_fire(node, symbol, stamp, entry.time);
                    if self.halted {
                        break;
                    }
                }
                Action::GateFire { node, stamp } => {
                    self.gate_fire(node, stamp, entry.time);
                }
                Action::DriverEmit { feeder } => {
                    self.emit_on_feeder(feeder, entry.time, BTreeSet::new());
                }
            }
        }
    }
}

/// Runs the network to the horizon with default options (halt on the
/// first computation interference).
pub fn simulate(net: &Network, horizon: Horizon, seed: u64) -> (SimTrace, Vec<InterferenceReport>) {
    simulate_with(net, horizon, seed, &SimOptions::default())
}

pub fn simulate_with(
    net: &Network,
    horizon: Horizon,
    seed: u64,
    options: &SimOptions,
) -> (SimTrace, Vec<InterferenceReport>) {
    let mut engine = Engine::new(net, seed, options.clone());
    engine.run(horizon);
    (
        SimTrace {
            events: engine.events,
        },
        engine.reports,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayVerdict {
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Re-checks a logged trace against a network: event ids and causes
/// consistent, wire edges alternating, and every automaton's local
/// sequence (deliveries at arrival times, emissions at emit times)
/// accepted by its specification. Returns an error when the trace names
/// channels or symbols the network does not have.
pub fn replay(trace: &SimTrace, net: &Network) -> Result<ReplayVerdict, TraceError> {
    let mut failures = Vec::new();

    let mut by_id: BTreeMap<u64, &SimEvent> = BTreeMap::new();
    for e in &trace.events {
        if by_id.insert(e.id, e).is_some() {
            failures.push(format!("event id {} appears twice", e.id));
        }
    }

    // Feeder lookup: channels by id, drivers by id.
    let mut feeder_label: HashMap<&str, (&Symbol, Option<&PortRef>, Option<&PortRef>)> =
        HashMap::new();
    for c in net.channels() {
        feeder_label.insert(c.id.as_str(), (&c.source.port, Some(&c.source), Some(&c.sink)));
    }
    for d in net.drivers() {
        feeder_label.insert(d.id.as_str(), (&d.sink.port, None, Some(&d.sink)));
    }

    for e in &trace.events {
        let (label, _, _) = feeder_label.get(e.channel.as_str()).ok_or_else(|| {
            TraceError::NetworkMismatch(format!("unknown channel {:?}", e.channel))
        })?;
        if *label != &e.transition.symbol {
            return Err(TraceError::NetworkMismatch(format!(
                "event {} labels channel {:?} with {:?}",
                e.id, e.channel, e.transition.symbol
            )));
        }
        if e.arrival_time <= e.emit_time {
            failures.push(format!("event {} does not move forward in time", e.id));
        }
        for c in &e.causes {
            match by_id.get(c) {
                Some(cause) if cause.arrival_time < e.arrival_time => {}
                Some(_) => failures.push(format!("event {} caused by later event {c}", e.id)),
                None => failures.push(format!("event {} caused by unknown event {c}", e.id)),
            }
        }
    }

    // Edges on one wire must alternate, starting with a rise.
    let mut per_feeder: BTreeMap<&str, Vec<&SimEvent>> = BTreeMap::new();
    for e in &trace.events {
        per_feeder.entry(e.channel.as_str()).or_default().push(e);
    }
    for (chan, mut evs) in per_feeder {
        evs.sort_by_key(|e| (e.emit_time, e.id));
        let mut level = false;
        for e in evs {
            if e.transition.edge.level() == level {
                failures.push(format!(
                    "channel {chan:?}: event {} repeats the {} edge",
                    e.id,
                    e.transition.edge.arrow()
                ));
            }
            level = e.transition.edge.level();
        }
    }

    // Local replay per automaton: merge deliveries and emissions in time
    // order and run the acceptor. Fan-out emissions (same port, same
    // instant) count once.
    for node in net.nodes() {
        let spec = match &node.behavior {
            Behavior::Automaton(s) => s,
            _ => continue,
        };
        let mut local: Vec<(Time, u64, Symbol)> = Vec::new();
        let mut seen_emit: BTreeSet<(Time, Symbol)> = BTreeSet::new();
        for e in &trace.events {
            let Some((_, src, sink)) = feeder_label.get(e.channel.as_str()) else {
                continue;
            };
            if let Some(src) = src {
                if src.node == node.id && seen_emit.insert((e.emit_time, src.port.clone())) {
                    local.push((e.emit_time, e.id, src.port.clone()));
                }
            }
            if let Some(sink) = sink {
                if sink.node == node.id {
                    local.push((e.arrival_time, e.id, sink.port.clone()));
                }
            }
        }
        local.sort();
        let acc = spec.traces();
        let mut state = acc.initial();
        for (time, _, symbol) in local {
            match acc.successor(state, &symbol) {
                Some(next) => state = next,
                None => {
                    failures.push(format!(
                        "node {:?} cannot take {symbol} at time {time} (state {state})",
                        node.id
                    ));
                    break;
                }
            }
        }
    }

    Ok(ReplayVerdict {
        ok: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_structure;

    fn spec(src: &str) -> TraceStructure {
        parse_structure(src).unwrap()
    }

    /// One sender that begins by sending, one echo: x and y alternate.
    fn two_node_ring() -> Network {
        Network::new(
            vec![
                Node::automaton("kick", spec("pref *[x!;y?]")),
                Node::automaton("echo", spec("pref *[p?;q!]")),
            ],
            vec![
                Channel::new(("kick", "x"), ("echo", "p"), DelayModel::fixed(1)),
                Channel::new(("echo", "q"), ("kick", "y"), DelayModel::fixed(1)),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn ring_alternates_deterministically() {
        let net = two_node_ring();
        let (trace, reports) = simulate(&net, Horizon::Events(10), 7);
        assert!(reports.is_empty());
        assert_eq!(trace.events.len(), 10);
        // kick fires x at t=1 (response 1), echo hears it at t=2, answers
        // q at t=3, heard at t=4; the round trip is 4 ticks.
        let first = &trace.events[0];
        assert_eq!(first.transition.symbol.as_str(), "x");
        assert_eq!(first.transition.edge, Edge::Rise);
        assert_eq!(first.emit_time, Time::from_int(1));
        assert_eq!(first.arrival_time, Time::from_int(2));
        let symbols: Vec<&str> = trace
            .events
            .iter()
            .map(|e| e.transition.symbol.as_str())
            .collect();
        assert_eq!(symbols, vec!["x", "q", "x", "q", "x", "q", "x", "q", "x", "q"]);
        // Edges alternate per wire.
        assert_eq!(trace.events[0].transition.edge, Edge::Rise);
        assert_eq!(trace.events[2].transition.edge, Edge::Fall);

        let (again, _) = simulate(&net, Horizon::Events(10), 7);
        assert_eq!(trace, again);

        let verdict = replay(&trace, &net).unwrap();
        assert!(verdict.ok, "{:?}", verdict.failures);
    }

    #[test]
    fn time_horizon_stops_the_clock() {
        let net = two_node_ring();
        let (trace, _) = simulate(&net, Horizon::Time(Time::from_int(9)), 7);
        assert!(trace.events.iter().all(|e| e.emit_time <= Time::from_int(9)));
        assert!(!trace.events.is_empty());
    }

    #[test]
    fn unexpected_symbol_is_computation_interference() {
        // The echo only answers once; the second x finds it dead.
        let net = Network::new(
            vec![
                Node::automaton("kick", spec("pref *[x!;y?]")),
                Node::automaton("echo", spec("pref (p?;q!)")),
            ],
            vec![
                Channel::new(("kick", "x"), ("echo", "p"), DelayModel::fixed(1)),
                Channel::new(("echo", "q"), ("kick", "y"), DelayModel::fixed(1)),
            ],
            vec![],
        )
        .unwrap();
        let (trace, reports) = simulate(&net, Horizon::Events(50), 3);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.kind, InterferenceKind::Computation);
        assert_eq!(r.location, "echo");
        assert_eq!(r.symbol.as_ref().unwrap().as_str(), "p");
        assert_eq!(r.state.as_deref(), Some("2"));
        // Halt mode: nothing was delivered after the report.
        let last_arrival = trace
            .events
            .iter()
            .map(|e| e.arrival_time)
            .max()
            .unwrap();
        assert!(r.time <= last_arrival);
    }

    #[test]
    fn log_mode_keeps_running_past_interference() {
        // A free-running source against a one-shot sink: every delivery
        // after the first is unexpected.
        let net = Network::new(
            vec![
                Node::automaton("src", spec("pref *[x!]")).with_response(DelayModel::fixed(3)),
                Node::automaton("snk", spec("pref (p?)")),
            ],
            vec![Channel::new(("src", "x"), ("snk", "p"), DelayModel::fixed(1))],
            vec![],
        )
        .unwrap();
        let (halted_trace, halted) = simulate(&net, Horizon::Events(10), 3);
        assert_eq!(halted.len(), 1);

        let relaxed = SimOptions {
            on_interference: OnInterference::Log,
            ..SimOptions::default()
        };
        let (logged_trace, logged) = simulate_with(&net, Horizon::Events(10), 3, &relaxed);
        assert_eq!(logged.len(), 9, "deliveries two through ten all clash");
        assert!(logged.iter().all(|r| {
            r.kind == InterferenceKind::Computation && r.location == "snk"
        }));
        assert!(logged_trace.events.len() > halted_trace.events.len());
    }

    #[test]
    fn pileup_on_a_slow_wire_is_transmission_interference() {
        // The source free-runs every tick; the wire takes 10.
        let net = Network::new(
            vec![
                Node::automaton("src", spec("pref *[a!]")),
                Node::automaton("dst", spec("pref *[b?]")),
            ],
            vec![Channel::new(
                ("src", "a"),
                ("dst", "b"),
                DelayModel::fixed(10),
            )],
            vec![],
        )
        .unwrap();
        let (_, reports) = simulate(&net, Horizon::Time(Time::from_int(8)), 0);
        assert!(!reports.is_empty());
        assert!(reports
            .iter()
            .all(|r| r.kind == InterferenceKind::Transmission));
        assert!(reports[0].involved.len() >= 2);
    }

    #[test]
    fn and_gate_fires_only_when_both_inputs_are_high() {
        let net = Network::new(
            vec![
                Node::gate("g", LevelGateKind::And, ["a", "b"], "z"),
                Node::automaton("sink", spec("pref *[z?]")),
            ],
            vec![Channel::new(("g", "z"), ("sink", "z"), DelayModel::fixed(1))],
            vec![
                Driver::new("da", ("g", "a"), vec![Time::from_int(0)]),
                Driver::new("db", ("g", "b"), vec![Time::from_int(5)]),
            ],
        )
        .unwrap();
        let (trace, reports) = simulate(&net, Horizon::Events(10), 0);
        assert!(reports.is_empty());
        let z_events: Vec<&SimEvent> = trace
            .events
            .iter()
            .filter(|e| e.transition.symbol.as_str() == "z")
            .collect();
        // a up at 1, b up at 6, response 1: z rises at 7.
        assert_eq!(z_events.len(), 1);
        assert_eq!(z_events[0].emit_time, Time::from_int(7));
        assert_eq!(z_events[0].transition.edge, Edge::Rise);
    }

    #[test]
    fn cancelled_pending_edge_is_computation_interference_at_the_gate() {
        // b rises at 6 arming z; a falls at 13/2, inside the response
        // window, so the armed edge is cancelled.
        let net = Network::new(
            vec![
                Node::gate("g", LevelGateKind::And, ["a", "b"], "z")
                    .with_response(DelayModel::fixed(1)),
                Node::automaton("sink", spec("pref *[z?]")),
            ],
            vec![Channel::new(("g", "z"), ("sink", "z"), DelayModel::fixed(1))],
            vec![
                Driver::new("da", ("g", "a"), vec![Time::from_int(0), Time::new(11, 2)]),
                Driver::new("db", ("g", "b"), vec![Time::from_int(5)]),
            ],
        )
        .unwrap();
        let (trace, reports) = simulate(&net, Horizon::Events(10), 0);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.kind, InterferenceKind::Computation);
        assert_eq!(r.location, "g");
        assert_eq!(r.time, Time::new(13, 2));
        assert!(r.state.as_deref().unwrap().contains("cancelled"));
        assert!(trace
            .events
            .iter()
            .all(|e| e.transition.symbol.as_str() != "z"));
    }

    #[test]
    fn c_level_holds_until_inputs_agree() {
        let net = Network::new(
            vec![
                Node::gate("c", LevelGateKind::CLevel, ["a", "b"], "u"),
                Node::automaton("sink", spec("pref *[u?]")),
            ],
            vec![Channel::new(("c", "u"), ("sink", "u"), DelayModel::fixed(1))],
            vec![
                Driver::new("da", ("c", "a"), vec![Time::from_int(0), Time::from_int(20)]),
                Driver::new("db", ("c", "b"), vec![Time::from_int(10), Time::from_int(30)]),
            ],
        )
        .unwrap();
        let (trace, reports) = simulate(&net, Horizon::Events(20), 0);
        assert!(reports.is_empty());
        let u_events: Vec<(Time, Edge)> = trace
            .events
            .iter()
            .filter(|e| e.transition.symbol.as_str() == "u")
            .map(|e| (e.emit_time, e.transition.edge))
            .collect();
        // Rise once both are up (11 + response), fall once both are down.
        assert_eq!(
            u_events,
            vec![
                (Time::from_int(12), Edge::Rise),
                (Time::from_int(32), Edge::Fall)
            ]
        );
    }

    #[test]
    fn latch_race_inside_the_window_is_a_glitch() {
        let net = Network::new(
            vec![
                Node::gate("l", LevelGateKind::Latch, ["x", "e"], "z"),
                Node::automaton("sink", spec("pref *[z?]")),
            ],
            vec![Channel::new(("l", "z"), ("sink", "z"), DelayModel::fixed(1))],
            vec![
                // e rises at 1, falls at 11; x rises at 11 too.
                Driver::new("de", ("l", "e"), vec![Time::from_int(0), Time::from_int(10)]),
                Driver::new("dx", ("l", "x"), vec![Time::from_int(10)]),
            ],
        )
        .unwrap();
        let (_, reports) = simulate(&net, Horizon::Events(10), 0);
        let glitches: Vec<&InterferenceReport> = reports
            .iter()
            .filter(|r| r.kind == InterferenceKind::Glitch)
            .collect();
        assert_eq!(glitches.len(), 1);
        assert_eq!(glitches[0].location, "l");
        assert_eq!(glitches[0].time, Time::from_int(11));
    }

    #[test]
    fn forks_copy_one_arrival_to_every_branch_at_one_instant() {
        let net = Network::new(
            vec![
                Node::automaton("kick", spec("pref *[a!;k?]")),
                Node::fork("f", "a", &["b", "c"]).isochronic(None),
                Node::automaton("left", spec("pref *[b?]")),
                Node::automaton("right", spec("pref *[c?;k!]")),
            ],
            vec![
                Channel::new(("kick", "a"), ("f", "a"), DelayModel::fixed(1)),
                Channel::new(("f", "b"), ("left", "b"), DelayModel::fixed(2)),
                Channel::new(("f", "c"), ("right", "c"), DelayModel::fixed(3)),
                Channel::new(("right", "k"), ("kick", "k"), DelayModel::fixed(1)),
            ],
            vec![],
        )
        .unwrap();
        let (trace, reports) = simulate(&net, Horizon::Events(8), 0);
        assert!(reports.is_empty());
        let b = trace
            .events
            .iter()
            .find(|e| e.transition.symbol.as_str() == "b")
            .unwrap();
        let c = trace
            .events
            .iter()
            .find(|e| e.transition.symbol.as_str() == "c")
            .unwrap();
        // Same emission instant (the fork adds no response delay), same
        // cause, different branch delays.
        assert_eq!(b.emit_time, c.emit_time);
        assert_eq!(b.causes, c.causes);
        assert_eq!(c.arrival_time - b.arrival_time, Time::from_int(1));
        let verdict = replay(&trace, &net).unwrap();
        assert!(verdict.ok, "{:?}", verdict.failures);
    }

    #[test]
    fn arbitration_is_seeded_and_policy_driven() {
        let a = (crate::trace::Symbol::new("a").unwrap(), 5u64);
        let b = (crate::trace::Symbol::new("b").unwrap(), 2u64);
        let pending = vec![a.clone(), b.clone()];

        let mut seen = BTreeSet::new();
        for seed in 1..=100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen.insert(arbitrate(&pending, ArbitrationPolicy::Random, &mut rng));
        }
        assert_eq!(seen.len(), 2, "both outcomes occur across seeds");

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            arbitrate(&pending, ArbitrationPolicy::Fifo, &mut rng),
            b.0,
            "fifo picks the oldest stamp"
        );
        assert_eq!(
            arbitrate(&pending[..1], ArbitrationPolicy::Random, &mut rng),
            a.0,
            "singletons need no randomness"
        );
    }

    #[test]
    fn uniform_delays_stay_inside_their_bounds() {
        let model = DelayModel::uniform(1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for i in 0..200 {
            let d = model.sample(&mut rng, i);
            assert!(d >= Time::from_int(1) && d < Time::from_int(5));
        }
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for i in 0..50 {
            assert_eq!(model.sample(&mut a, i), model.sample(&mut b, i));
        }
    }

    #[test]
    fn netlists_round_trip_through_json() {
        let net = two_node_ring();
        let json = net.to_json();
        let back = Network::from_json(&json).unwrap();
        let (t1, _) = simulate(&net, Horizon::Events(6), 1);
        let (t2, _) = simulate(&back, Horizon::Events(6), 1);
        assert_eq!(t1, t2);

        let text = r#"{
            "nodes": [
                {"id": "kick", "kind": "automaton", "spec": "pref *[x!;y?]"},
                {"id": "echo", "kind": "automaton", "spec": "pref *[p?;q!]"}
            ],
            "channels": [
                {"from": "kick.x", "to": "echo.p", "delay": {"kind": "fixed", "d": 1}},
                {"from": "echo.q", "to": "kick.y", "delay": {"kind": "fixed", "d": "1"}}
            ]
        }"#;
        let parsed = Network::from_json(text).unwrap();
        let (t3, _) = simulate(&parsed, Horizon::Events(6), 1);
        assert_eq!(t1, t3);
    }

    #[test]
    fn wiring_mistakes_are_rejected() {
        // Unfed input port.
        let r = Network::new(
            vec![Node::automaton("echo", spec("pref *[p?;q!]"))],
            vec![],
            vec![],
        );
        assert!(matches!(r, Err(TraceError::MalformedNetwork(_))));

        // Two feeders on one port.
        let r = Network::new(
            vec![
                Node::automaton("kick", spec("pref *[x!;y?]")),
                Node::automaton("echo", spec("pref *[p?;q!]")),
            ],
            vec![
                Channel::new(("kick", "x"), ("echo", "p"), DelayModel::fixed(1)),
                Channel::new(("echo", "q"), ("kick", "y"), DelayModel::fixed(1)),
            ],
            vec![Driver::new("dup", ("echo", "p"), vec![Time::from_int(1)])],
        );
        assert!(matches!(r, Err(TraceError::MalformedNetwork(_))));

        // Channel leaving an input port.
        let r = Network::new(
            vec![
                Node::automaton("kick", spec("pref *[x!;y?]")),
                Node::automaton("echo", spec("pref *[p?;q!]")),
            ],
            vec![
                Channel::new(("kick", "y"), ("echo", "p"), DelayModel::fixed(1)),
                Channel::new(("echo", "q"), ("kick", "y"), DelayModel::fixed(1)),
            ],
            vec![],
        );
        assert!(matches!(r, Err(TraceError::MalformedNetwork(_))));

        // Non-positive delay.
        let r = Network::new(
            vec![
                Node::automaton("kick", spec("pref *[x!;y?]")),
                Node::automaton("echo", spec("pref *[p?;q!]")),
            ],
            vec![
                Channel::new(("kick", "x"), ("echo", "p"), DelayModel::fixed(0)),
                Channel::new(("echo", "q"), ("kick", "y"), DelayModel::fixed(1)),
            ],
            vec![],
        );
        assert!(matches!(r, Err(TraceError::NonPositiveDelay(_))));
    }

    #[test]
    fn replay_rejects_a_reordered_causal_pair() {
        let net = two_node_ring();
        let (trace, _) = simulate(&net, Horizon::Events(6), 7);
        let mut tampered = trace.clone();
        // Swap the arrival order of the first two deliveries at kick and
        // echo by pushing the first x past the first q.
        let q_arrival = tampered.events[1].arrival_time;
        tampered.events[0].arrival_time = q_arrival + Time::from_int(1);
        let verdict = replay(&tampered, &net).unwrap();
        assert!(!verdict.ok);

        let mut unknown = trace.clone();
        unknown.events[0].channel = "no-such-wire".into();
        assert!(matches!(
            replay(&unknown, &net),
            Err(TraceError::NetworkMismatch(_))
        ));
    }

    #[test]
    fn times_serialize_as_exact_rationals() {
        assert_eq!(Time::new(13, 2).to_string(), "13/2");
        assert_eq!(Time::from_int(4).to_string(), "4");
        assert_eq!("7/4".parse::<Time>().unwrap(), Time::new(7, 4));
        assert_eq!("12".parse::<Time>().unwrap(), Time::from_int(12));
        assert_eq!(Time::new(4, 8), Time::new(1, 2));
        assert!("1/0".parse::<Time>().is_err());

        let json = serde_json::to_string(&Time::new(3, 4)).unwrap();
        assert_eq!(json, "\"3/4\"");
        let back: Time = serde_json::from_str("\"3/4\"").unwrap();
        assert_eq!(back, Time::new(3, 4));
        let from_int: Time = serde_json::from_str("5").unwrap();
        assert_eq!(from_int, Time::from_int(5));
    }
}
