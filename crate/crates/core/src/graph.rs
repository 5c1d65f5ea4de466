//! Space-time causality graphs over simulation traces.
//!
//! Every module (node) of the network is drawn as a vertical line
//! carrying its locally ordered happenings: points. A delivery point
//! marks a transition reaching an input port, an emission point marks
//! one leaving an output port, and each logged event contributes one
//! inclined arrow from its emission point to its delivery point. Arrows
//! always lean forward: the sink time strictly exceeds the source time.
//! Scripted stimuli get vertical lines of their own, named by driver id.
//!
//! Fan-out emissions merge: all events leaving one port of one node at
//! one instant share a single emission point, so the branches of a
//! multi-channel output visibly diverge from one point. The collapsed
//! view goes further and splices fork nodes out entirely, reattaching
//! each branch arrow to the upstream emission that fed the fork; that is
//! the classical picture in which a forked signal fans out directly from
//! its producer's line.
//!
//! Points on one line are totally ordered; across lines the order is
//! the partial order generated by vertical succession and arrows.
//! Happenings at one instant on one line are linearized canonically:
//! deliveries first, then emissions, each batch by event id.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::TraceError;
use crate::sim::{replay, Behavior, Edge, Network, SimEvent, SimTrace, Time, Transition};
use crate::trace::Symbol;

/// One happening on one module line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub node: String,
    /// Position on the line: consecutive from zero, time-monotone.
    pub index: usize,
    pub time: Time,
    pub label: Transition,
    /// True when the module sits in a rendezvous state after this point
    /// (an automaton state offering two or more inputs). Rendered as a
    /// thickened vertical segment.
    pub wait: bool,
}

impl Point {
    fn tag(&self) -> String {
        format!("{}{} @ {}", self.label.symbol, self.label.edge.arrow(), self.time)
    }
}

/// One propagation arrow: the event's emission point to its delivery
/// point. `source` and `sink` index into [`CausalGraph::points`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrow {
    pub event: u64,
    pub source: usize,
    pub sink: usize,
}

/// A required local order between two points of one module line, each
/// addressed by transition label and occurrence index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderConstraint {
    pub node: String,
    pub before: Transition,
    #[serde(default)]
    pub before_occurrence: usize,
    pub after: Transition,
    #[serde(default)]
    pub after_occurrence: usize,
}

impl OrderConstraint {
    /// First occurrences by default.
    pub fn new(node: &str, before: (&str, Edge), after: (&str, Edge)) -> OrderConstraint {
        let sym = |s: &str| Symbol::new(s).expect("valid symbol name");
        OrderConstraint {
            node: node.to_string(),
            before: Transition {
                symbol: sym(before.0),
                edge: before.1,
            },
            before_occurrence: 0,
            after: Transition {
                symbol: sym(after.0),
                edge: after.1,
            },
            after_occurrence: 0,
        }
    }

    pub fn occurrences(mut self, before: usize, after: usize) -> OrderConstraint {
        self.before_occurrence = before;
        self.after_occurrence = after;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderViolation {
    pub constraint: OrderConstraint,
    /// Observed line positions: `before_index` did not precede
    /// `after_index`.
    pub before_index: usize,
    pub after_index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderVerdict {
    pub holds: bool,
    pub violations: Vec<OrderViolation>,
}

/// The space-time graph of one run.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    points: Vec<Point>,
    /// Point ids per module line, in vertical order. Every module keeps
    /// a line even when no event touched it.
    lines: BTreeMap<String, Vec<usize>>,
    arrows: Vec<Arrow>,
    /// Forward edges: vertical successors plus arrows.
    succ: Vec<Vec<usize>>,
}

struct LineEntry {
    time: Time,
    kind: u8,
    disc: u64,
    label: Transition,
}

impl CausalGraph {
    /// Builds the full graph: one line per node and per driver, one
    /// arrow per event. The trace must replay cleanly against the
    /// network.
    pub fn build(trace: &SimTrace, net: &Network) -> Result<CausalGraph, TraceError> {
        Self::build_impl(trace, net, false)
    }

    /// Builds the figure view: fork nodes are spliced out and their
    /// branch arrows leave the upstream emission point directly, so a
    /// forked signal visibly diverges from its producer.
    pub fn build_collapsed(trace: &SimTrace, net: &Network) -> Result<CausalGraph, TraceError> {
        Self::build_impl(trace, net, true)
    }

    fn build_impl(trace: &SimTrace, net: &Network, collapse: bool) -> Result<CausalGraph, TraceError> {
        let verdict = replay(trace, net)?;
        if !verdict.ok {
            return Err(TraceError::InconsistentTrace(verdict.failures.join("; ")));
        }

        let mut chan_ends: HashMap<&str, (&str, &Symbol, &str, &Symbol)> = HashMap::new();
        for c in net.channels() {
            chan_ends.insert(
                c.id.as_str(),
                (
                    c.source.node.as_str(),
                    &c.source.port,
                    c.sink.node.as_str(),
                    &c.sink.port,
                ),
            );
        }
        let mut driver_sink: HashMap<&str, (&str, &Symbol)> = HashMap::new();
        for d in net.drivers() {
            driver_sink.insert(d.id.as_str(), (d.sink.node.as_str(), &d.sink.port));
        }
        let forks: BTreeSet<&str> = net
            .nodes()
            .iter()
            .filter(|n| matches!(n.behavior, Behavior::Fork { .. }))
            .map(|n| n.id.as_str())
            .collect();
        let hidden = |node: &str| collapse && forks.contains(node);
        let by_id: BTreeMap<u64, &SimEvent> = trace.events.iter().map(|e| (e.id, e)).collect();

        // Source line and port of an event as logged, before splicing.
        let raw_source = |e: &SimEvent| -> (String, Symbol) {
            match chan_ends.get(e.channel.as_str()) {
                Some((src_node, src_port, _, _)) => (src_node.to_string(), (*src_port).clone()),
                None => (e.channel.clone(), e.transition.symbol.clone()),
            }
        };
        // Walks cause chains through hidden fork relays up to a retained
        // emitter.
        let eff_source = |e: &SimEvent| -> Result<(String, Symbol, Time, Edge), TraceError> {
            let mut cur = e;
            loop {
                let (line, port) = raw_source(cur);
                if !hidden(&line) {
                    return Ok((line, port, cur.emit_time, cur.transition.edge));
                }
                if cur.causes.len() != 1 {
                    return Err(TraceError::InconsistentTrace(format!(
                        "fork relay event {} has {} causes",
                        cur.id,
                        cur.causes.len()
                    )));
                }
                let c = cur.causes.iter().next().copied().expect("one cause");
                cur = by_id.get(&c).ok_or_else(|| {
                    TraceError::InconsistentTrace(format!("event {} cites unknown cause {c}", cur.id))
                })?;
            }
        };

        let mut entries: BTreeMap<String, Vec<LineEntry>> = BTreeMap::new();
        for n in net.nodes() {
            if !hidden(&n.id) {
                entries.insert(n.id.clone(), Vec::new());
            }
        }
        for d in net.drivers() {
            entries.insert(d.id.clone(), Vec::new());
        }

        // Emission points merge per (line, port, instant, sense);
        // deliveries stay one per event.
        let mut emit_sites: BTreeMap<(String, Symbol, Time, Edge), u64> = BTreeMap::new();
        for e in &trace.events {
            let (src_line, src_port) = raw_source(e);
            if !hidden(&src_line) {
                let key = (src_line, src_port, e.emit_time, e.transition.edge);
                let disc = emit_sites.entry(key).or_insert(e.id);
                *disc = (*disc).min(e.id);
            }
        }
        for ((line, port, time, edge), disc) in &emit_sites {
            entries.get_mut(line).expect("retained line").push(LineEntry {
                time: *time,
                kind: 1,
                disc: *disc,
                label: Transition {
                    symbol: port.clone(),
                    edge: *edge,
                },
            });
        }
        for e in &trace.events {
            let (sink_node, sink_port) = match chan_ends.get(e.channel.as_str()) {
                Some((_, _, sn, sp)) => (*sn, *sp),
                None => {
                    let (sn, sp) = driver_sink[e.channel.as_str()];
                    (sn, sp)
                }
            };
            if hidden(sink_node) {
                continue;
            }
            entries.get_mut(sink_node).expect("retained line").push(LineEntry {
                time: e.arrival_time,
                kind: 0,
                disc: e.id,
                label: Transition {
                    symbol: sink_port.clone(),
                    edge: e.transition.edge,
                },
            });
        }

        // Freeze the vertical orders and assign flat ids.
        let mut points = Vec::new();
        let mut lines = BTreeMap::new();
        let mut emit_point: BTreeMap<(String, Symbol, Time, Edge), usize> = BTreeMap::new();
        let mut delivery_point: BTreeMap<u64, usize> = BTreeMap::new();
        for (line, mut list) in entries {
            list.sort_by(|a, b| (a.time, a.kind, a.disc).cmp(&(b.time, b.kind, b.disc)));
            let mut ids = Vec::with_capacity(list.len());
            for (index, entry) in list.into_iter().enumerate() {
                let id = points.len();
                if entry.kind == 1 {
                    emit_point.insert(
                        (line.clone(), entry.label.symbol.clone(), entry.time, entry.label.edge),
                        id,
                    );
                } else {
                    delivery_point.insert(entry.disc, id);
                }
                points.push(Point {
                    node: line.clone(),
                    index,
                    time: entry.time,
                    label: entry.label,
                    wait: false,
                });
                ids.push(id);
            }
            lines.insert(line, ids);
        }

        // Rendezvous markers: run each automaton's acceptor down its
        // line; a state offering two or more inputs is a wait state.
        for n in net.nodes() {
            let spec = match &n.behavior {
                Behavior::Automaton(s) => s,
                _ => continue,
            };
            let Some(ids) = lines.get(&n.id) else { continue };
            let acc = spec.traces();
            let mut state = Some(acc.initial());
            for &id in ids {
                state = state.and_then(|q| acc.successor(q, &points[id].label.symbol));
                if let Some(q) = state {
                    let waiting_inputs = acc
                        .successors(q)
                        .filter(|(s, _)| spec.inputs().contains(*s))
                        .count();
                    points[id].wait = waiting_inputs >= 2;
                }
            }
        }

        // One arrow per event whose delivery survives; splicing rewires
        // sources past hidden relays.
        let mut arrows = Vec::new();
        for e in &trace.events {
            let Some(&sink) = delivery_point.get(&e.id) else { continue };
            let (line, port, time, edge) = eff_source(e)?;
            let source = *emit_point
                .get(&(line, port, time, edge))
                .expect("emission point materialized");
            arrows.push(Arrow {
                event: e.id,
                source,
                sink,
            });
        }
        arrows.sort_by_key(|a| a.event);

        let mut succ = vec![Vec::new(); points.len()];
        for ids in lines.values() {
            for w in ids.windows(2) {
                succ[w[0]].push(w[1]);
            }
        }
        for a in &arrows {
            succ[a.source].push(a.sink);
        }

        Ok(CausalGraph {
            points,
            lines,
            arrows,
            succ,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn lines(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.lines
    }

    pub fn line(&self, node: &str) -> Option<&[usize]> {
        self.lines.get(node).map(Vec::as_slice)
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    /// Finds the `occurrence`-th point labeled `symbol`+`edge` on one
    /// line, counting down the line from zero.
    pub fn locate(&self, node: &str, symbol: &str, edge: Edge, occurrence: usize) -> Option<usize> {
        let ids = self.lines.get(node)?;
        ids.iter()
            .copied()
            .filter(|&id| {
                let p = &self.points[id];
                p.label.symbol.as_str() == symbol && p.label.edge == edge
            })
            .nth(occurrence)
    }

    /// True iff a directed path of vertical segments and arrows leads
    /// from `p` to `q`: `p` is a cause of `q`. Two branches of one fork
    /// are not related in either direction, though their shared origin
    /// precedes both.
    pub fn causally_related(&self, p: usize, q: usize) -> Result<bool, TraceError> {
        let n = self.points.len();
        if p >= n || q >= n {
            return Err(TraceError::UnknownPoint(format!(
                "point index out of range (have {n} points)"
            )));
        }
        if p == q {
            return Ok(false);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([p]);
        seen[p] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &self.succ[x] {
                if y == q {
                    return Ok(true);
                }
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        Ok(false)
    }

    /// Checks required local orders. Each constraint resolves both of
    /// its points on one line and demands the first strictly precede
    /// the second there.
    pub fn check_order(&self, constraints: &[OrderConstraint]) -> Result<OrderVerdict, TraceError> {
        let mut violations = Vec::new();
        for c in constraints {
            let resolve = |t: &Transition, occ: usize| -> Result<usize, TraceError> {
                self.locate(&c.node, t.symbol.as_str(), t.edge, occ)
                    .ok_or_else(|| {
                        TraceError::UnresolvableConstraint(format!(
                            "no occurrence {occ} of {}{} on line {:?}",
                            t.symbol,
                            t.edge.arrow(),
                            c.node
                        ))
                    })
            };
            let before = resolve(&c.before, c.before_occurrence)?;
            let after = resolve(&c.after, c.after_occurrence)?;
            if self.points[before].index >= self.points[after].index {
                violations.push(OrderViolation {
                    constraint: c.clone(),
                    before_index: self.points[before].index,
                    after_index: self.points[after].index,
                });
            }
        }
        Ok(OrderVerdict {
            holds: violations.is_empty(),
            violations,
        })
    }

    /// DOT rendering: one cluster per non-empty line, vertical segments
    /// inside, propagation arrows between. Deterministic byte-for-byte
    /// for a given graph.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        out.push_str("digraph spacetime {\n");
        out.push_str("  rankdir=TB;\n");
        out.push_str("  node [shape=point, width=0.1];\n");
        out.push_str("  edge [fontsize=10];\n");
        for (line, ids) in &self.lines {
            if ids.is_empty() {
                continue;
            }
            let _ = writeln!(out, "  subgraph \"cluster_{line}\" {{");
            let _ = writeln!(out, "    label=\"{line}\";");
            for &id in ids {
                let p = &self.points[id];
                let _ = writeln!(out, "    \"{line}/{}\" [xlabel=\"{}\"];", p.index, p.tag());
            }
            for w in ids.windows(2) {
                let width = if self.points[w[0]].wait { 3 } else { 1 };
                let _ = writeln!(
                    out,
                    "    \"{line}/{}\" -> \"{line}/{}\" [arrowhead=none, penwidth={width}];",
                    self.points[w[0]].index,
                    self.points[w[1]].index
                );
            }
            out.push_str("  }\n");
        }
        for a in &self.arrows {
            let s = &self.points[a.source];
            let t = &self.points[a.sink];
            let _ = writeln!(
                out,
                "  \"{}/{}\" -> \"{}/{}\" [label=\"{}{}\"];",
                s.node,
                s.index,
                t.node,
                t.index,
                s.label.symbol,
                s.label.edge.arrow()
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            lines: self
                .lines
                .iter()
                .map(|(node, ids)| LineDoc {
                    node: node.clone(),
                    points: ids.iter().map(|&id| self.points[id].clone()).collect(),
                })
                .collect(),
            arrows: self
                .arrows
                .iter()
                .map(|a| ArrowDoc {
                    event: a.event,
                    from: PointRefDoc {
                        node: self.points[a.source].node.clone(),
                        index: self.points[a.source].index,
                    },
                    to: PointRefDoc {
                        node: self.points[a.sink].node.clone(),
                        index: self.points[a.sink].index,
                    },
                })
                .collect(),
        }
    }

    /// JSON rendering: the full point and arrow lists.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("graph serializes")
    }
}

/// Serializable mirror of a [`CausalGraph`]: lines with their points,
/// arrows by (node, index) reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub lines: Vec<LineDoc>,
    pub arrows: Vec<ArrowDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDoc {
    pub node: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrowDoc {
    pub event: u64,
    pub from: PointRefDoc,
    pub to: PointRefDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRefDoc {
    pub node: String,
    pub index: usize,
}

impl GraphDoc {
    pub fn from_json(text: &str) -> Result<GraphDoc, TraceError> {
        serde_json::from_str(text).map_err(|e| TraceError::Malformed(format!("graph JSON: {e}")))
    }
}
