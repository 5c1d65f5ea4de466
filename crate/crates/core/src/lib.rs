//! Workbench for specifying, verifying, and simulating delay-insensitive
//! circuits.
//!
//! The core objects are *trace structures*: triples of an input alphabet, an
//! output alphabet, and a prefix-closed regular set of traces over their
//! union. Everything else is built on top of them:
//!
//! - [`trace`]: symbols, traces, trace structures, and the trace-set algebra
//!   (concatenation, union, repetition, prefix-closure, projection, weaving,
//!   reflection), decided on canonical finite acceptors ([`automaton`]).
//! - [`lang`]: a small expression language (`pref*[a?;b!]`) for writing
//!   specifications, with a parser, printer, and elaborator.
//! - [`rules`]: decision procedures for the delay-insensitivity rules and
//!   the synchronization / data-communication / arbitration classification.
//! - [`compose`]: network closure and decomposition verification: alphabet
//!   conditions, computation-interference freedom, and behavior equivalence
//!   of a network against its specification.
//! - [`primitives`]: the standard component library (WIRE, IWIRE, FORK,
//!   C-ELEMENT, TOGGLE, MERGE, SEQUENCER), gate-level fixtures, and the
//!   token-ring and Q-element example networks.
//! - [`sim`]: a deterministic discrete-event simulator for closed networks
//!   of event automata and level gates, with explicit per-channel delays and
//!   interference detection.
//! - [`graph`]: space-time causality graphs extracted from simulation
//!   traces, with ordering queries and DOT/JSON emission.
//! - [`switch`]: transistor-level switch networks: evaluation, drive-fight
//!   detection, and combinational/state-holding classification.

pub mod automaton;
pub mod compose;
pub mod error;
pub mod graph;
pub mod lang;
pub mod primitives;
pub mod rules;
pub mod sim;
pub mod switch;
pub mod trace;

pub use automaton::{RegularTraceSet, DEFAULT_ENUMERATION_BOUND};
pub use compose::{
    check_decomposition, check_separation, check_substitution, close_network, Decomposition,
    DecompositionReport,
};
pub use error::TraceError;
pub use graph::{CausalGraph, GraphDoc, OrderConstraint, OrderVerdict};
pub use primitives::{make, q_element_network, token_ring, token_ring_alloc, PrimitiveKind};
pub use sim::{
    simulate, simulate_with, Horizon, InterferenceReport, Network, SimOptions, SimTrace, Time,
};
pub use trace::{Symbol, Trace, TraceStructure};
