//! Batch front end for the workbench: elaborate specifications, check the
//! delay-insensitivity rules, verify decompositions, run netlists, render
//! space-time causality graphs, and emit the built-in examples.
//!
//! Machine-readable reports go to standard output; `--verbose` adds a short
//! human summary on the error stream. Output is byte-identical across runs
//! with the same inputs, flags, and seed.
//!
//! Exit codes: 0 when the command succeeds and every checked property holds,
//! 2 when a property fails or a run logs interference, 1 for usage, IO, or
//! malformed-input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ditrace::compose::{check_decomposition, Decomposition, DecompositionReport};
use ditrace::graph::CausalGraph;
use ditrace::lang::parse_structure;
use ditrace::primitives::{
    q_element_network, q_element_network_with, token_ring_alloc, PrimitiveKind, QElementConfig,
};
use ditrace::rules::{check_all, RuleReport};
use ditrace::sim::{simulate_with, DelayModel, Horizon, Network, OnInterference, SimOptions};
use ditrace::trace::TraceStructure;

#[derive(Parser)]
#[command(name = "ditrace", version, about = "Workbench for delay-insensitive circuits")]
struct Cli {
    /// Print a human summary on the error stream.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Interference {
    /// Stop at the first computation interference.
    Halt,
    /// Log every report and keep running.
    Log,
}

impl From<Interference> for OnInterference {
    fn from(i: Interference) -> OnInterference {
        match i {
            Interference::Halt => OnInterference::Halt,
            Interference::Log => OnInterference::Log,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Elaborate a specification into its canonical acceptor.
    Parse {
        /// File holding a specification expression or structure JSON.
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check the delay-insensitivity rules against a specification.
    CheckDi {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Report which interface discipline a specification obeys.
    Classify {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Verify a decomposition manifest against its target.
    Decompose {
        /// JSON manifest with a target spec and named part specs.
        manifest: PathBuf,
        /// Fail when an input symbol is read by more than one part.
        #[arg(long)]
        strict_forks: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run a netlist; events as JSON lines, then any interference reports.
    Simulate {
        /// Netlist JSON file.
        netlist: PathBuf,
        /// Seed for delay sampling and arbitration.
        #[arg(long)]
        seed: u64,
        /// Stop after this many delivered events.
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = Interference::Halt)]
        on_interference: Interference,
    },
    /// Run a netlist and render its space-time causality graph.
    Graph {
        netlist: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = Interference::Halt)]
        on_interference: Interference,
        /// Splice fork nodes out of the rendering.
        #[arg(long)]
        collapse_forks: bool,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
    },
    /// List the built-in examples, or emit one by name.
    Primitives {
        /// wire, iwire, fork, celement, toggle, merge, sequencer,
        /// q-element (netlist), or token-ring (decomposition manifest).
        name: Option<String>,
        /// q-element only: slow the y1 fork branch past the feedback loop.
        #[arg(long)]
        skew: bool,
        /// token-ring only: stage index used for symbol suffixes.
        #[arg(long, default_value_t = 0)]
        stage: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Decomposition manifest: a target and named parts, each given either as a
/// specification expression (`"spec"`) or an elaborated structure
/// (`"structure"`). The target may also be a bare expression string.
#[derive(Serialize, Deserialize)]
struct Manifest {
    target: SpecSource,
    parts: Vec<ManifestPart>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpecSource {
    Text(String),
    Structure(TraceStructure),
}

#[derive(Serialize, Deserialize)]
struct ManifestPart {
    name: String,
    #[serde(flatten)]
    source: PartSource,
}

#[derive(Serialize, Deserialize)]
enum PartSource {
    #[serde(rename = "spec")]
    Text(String),
    #[serde(rename = "structure")]
    Structure(TraceStructure),
}

impl SpecSource {
    fn elaborate(&self) -> Result<TraceStructure> {
        match self {
            SpecSource::Text(t) => Ok(parse_structure(t)?),
            SpecSource::Structure(ts) => Ok(ts.clone()),
        }
    }
}

impl PartSource {
    fn elaborate(&self) -> Result<TraceStructure> {
        match self {
            PartSource::Text(t) => Ok(parse_structure(t)?),
            PartSource::Structure(ts) => Ok(ts.clone()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit 1; --help and --version exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Parse { spec, format } => cmd_parse(&spec, format, verbose),
        Command::CheckDi { spec, format } => cmd_rules(&spec, format, verbose, false),
        Command::Classify { spec, format } => cmd_rules(&spec, format, verbose, true),
        Command::Decompose { manifest, strict_forks, format } => {
            cmd_decompose(&manifest, strict_forks, format, verbose)
        }
        Command::Simulate { netlist, seed, horizon, on_interference } => {
            cmd_simulate(&netlist, seed, horizon, on_interference, verbose)
        }
        Command::Graph { netlist, seed, horizon, on_interference, collapse_forks, format } => {
            cmd_graph(&netlist, seed, horizon, on_interference, collapse_forks, format, verbose)
        }
        Command::Primitives { name, skew, stage, format } => {
            cmd_primitives(name.as_deref(), skew, stage, format, verbose)
        }
    }
}

fn read_spec(path: &Path) -> Result<TraceStructure> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(&text)
            .with_context(|| format!("structure JSON in {}", path.display()))?)
    } else {
        Ok(parse_structure(&text)?)
    }
}

fn symbols_line(set: &std::collections::BTreeSet<ditrace::trace::Symbol>) -> String {
    set.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
}

fn cmd_parse(path: &Path, format: Format, verbose: bool) -> Result<u8> {
    let ts = read_spec(path)?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&ts)?),
        Format::Text => {
            println!("inputs: {}", symbols_line(ts.inputs()));
            println!("outputs: {}", symbols_line(ts.outputs()));
            println!("states: {}", ts.traces().state_count());
        }
        Format::Dot => bail!("parse emits json or text, not dot"),
    }
    if verbose {
        eprintln!(
            "elaborated {} states over {} symbols",
            ts.traces().state_count(),
            ts.alphabet().len()
        );
    }
    Ok(0)
}

fn print_rule_report(report: &RuleReport, format: Format) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
        Format::Text => {
            for (name, outcome) in &report.rules {
                println!("{name}: {}", if outcome.holds { "holds" } else { "fails" });
            }
            match &report.class {
                Some(c) => println!("class: {c}"),
                None => println!("class: none"),
            }
            println!("di: {}", report.di);
        }
        Format::Dot => bail!("rule reports come as json or text, not dot"),
    }
    Ok(())
}

fn cmd_rules(path: &Path, format: Format, verbose: bool, classify: bool) -> Result<u8> {
    let ts = read_spec(path)?;
    ts.validate_circuit_spec()?;
    let report = check_all(&ts);
    print_rule_report(&report, format)?;
    if classify {
        if verbose {
            match &report.class {
                Some(c) => eprintln!("classified as {c}"),
                None => eprintln!("fits no interface discipline"),
            }
        }
        Ok(if report.class.is_some() { 0 } else { 2 })
    } else {
        if verbose {
            eprintln!("delay-insensitive: {}", report.di);
        }
        Ok(if report.di { 0 } else { 2 })
    }
}

fn print_decomposition_report(
    report: &DecompositionReport,
    d: &Decomposition,
    format: Format,
) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
        Format::Text => {
            let verdict = |ok: bool| if ok { "holds" } else { "fails" };
            println!("closed: {}", verdict(report.closed.holds));
            println!("output interference: {}", verdict(report.output_interference.holds));
            println!(
                "computation interference: {}",
                verdict(report.computation_interference.holds)
            );
            println!("boundary: {}", verdict(report.boundary.holds));
            for shared in &report.shared_inputs {
                let readers: Vec<String> =
                    shared.readers.iter().map(|&i| d.component_name(i)).collect();
                println!("shared input {} read by {}", shared.symbol.as_str(), readers.join(", "));
            }
            println!("holds: {}", report.holds);
        }
        Format::Dot => bail!("decomposition reports come as json or text, not dot"),
    }
    Ok(())
}

fn cmd_decompose(path: &Path, strict: bool, format: Format, verbose: bool) -> Result<u8> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).with_context(|| format!("manifest in {}", path.display()))?;
    let target = manifest.target.elaborate().context("target")?;
    let parts = manifest
        .parts
        .iter()
        .map(|p| Ok((p.name.clone(), p.source.elaborate().with_context(|| p.name.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let d = Decomposition::new(target, parts)?;
    let report = check_decomposition(&d, strict);
    print_decomposition_report(&report, &d, format)?;
    if verbose {
        match &report.first_failure {
            None => eprintln!("decomposition holds"),
            Some(f) => eprintln!("decomposition fails: {f}"),
        }
    }
    Ok(if report.holds { 0 } else { 2 })
}

fn read_network(path: &Path) -> Result<Network> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Network::from_json(&text)?)
}

fn run_network(
    net: &Network,
    seed: u64,
    horizon: usize,
    on_interference: Interference,
) -> (ditrace::sim::SimTrace, Vec<ditrace::sim::InterferenceReport>) {
    let opts = SimOptions { on_interference: on_interference.into(), ..SimOptions::default() };
    simulate_with(net, Horizon::Events(horizon), seed, &opts)
}

fn cmd_simulate(
    path: &Path,
    seed: u64,
    horizon: usize,
    on_interference: Interference,
    verbose: bool,
) -> Result<u8> {
    let net = read_network(path)?;
    let (trace, reports) = run_network(&net, seed, horizon, on_interference);
    print!("{}", trace.to_jsonl());
    for report in &reports {
        println!("{}", serde_json::to_string(report)?);
    }
    if verbose {
        eprintln!("{} events, {} interference reports", trace.events.len(), reports.len());
    }
    Ok(if reports.is_empty() { 0 } else { 2 })
}

fn cmd_graph(
    path: &Path,
    seed: u64,
    horizon: usize,
    on_interference: Interference,
    collapse: bool,
    format: Format,
    verbose: bool,
) -> Result<u8> {
    let net = read_network(path)?;
    let (trace, reports) = run_network(&net, seed, horizon, on_interference);
    let graph = if collapse {
        CausalGraph::build_collapsed(&trace, &net)?
    } else {
        CausalGraph::build(&trace, &net)?
    };
    match format {
        Format::Dot => print!("{}", graph.to_dot()),
        Format::Json => println!("{}", graph.to_json()),
        Format::Text => bail!("graphs render as dot or json, not text"),
    }
    if verbose {
        eprintln!(
            "{} points, {} arrows, {} interference reports",
            graph.points().len(),
            graph.arrows().len(),
            reports.len()
        );
    }
    Ok(0)
}

fn skewed_q_element() -> QElementConfig {
    QElementConfig {
        y1_branch: DelayModel::fixed(4),
        b_response: DelayModel::fixed(5),
        ..QElementConfig::default()
    }
}

fn cmd_primitives(
    name: Option<&str>,
    skew: bool,
    stage: usize,
    format: Format,
    verbose: bool,
) -> Result<u8> {
    let Some(name) = name else {
        return list_primitives(format);
    };
    if skew && name != "q-element" {
        bail!("--skew only applies to q-element");
    }
    match name {
        "q-element" => {
            if format != Format::Json {
                bail!("q-element emits a netlist, json only");
            }
            let net = if skew {
                q_element_network_with(&skewed_q_element())
            } else {
                q_element_network()
            };
            println!("{}", net.to_json());
            if verbose {
                eprintln!("q-element netlist{}", if skew { " with skewed y1 branch" } else { "" });
            }
        }
        "token-ring" => {
            if format != Format::Json {
                bail!("token-ring emits a decomposition manifest, json only");
            }
            let (_, d) = token_ring_alloc(stage);
            let manifest = Manifest {
                target: SpecSource::Structure(d.target().clone()),
                parts: d
                    .parts()
                    .iter()
                    .map(|(n, s)| ManifestPart {
                        name: n.clone(),
                        source: PartSource::Structure(s.clone()),
                    })
                    .collect(),
            };
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            if verbose {
                eprintln!("token-ring stage {stage}: allocator target and five parts");
            }
        }
        other => {
            let Some(kind) = PrimitiveKind::from_name(other) else {
                bail!("unknown primitive {other:?}; run `ditrace primitives` for the list");
            };
            match format {
                Format::Json => {
                    let doc = json!({
                        "name": kind.name(),
                        "text": kind.text(),
                        "structure": kind.structure(),
                    });
                    println!("{}", serde_json::to_string_pretty(&doc)?);
                }
                Format::Text => println!("{}", kind.text()),
                Format::Dot => bail!("primitives come as json or text, not dot"),
            }
        }
    }
    Ok(0)
}

fn list_primitives(format: Format) -> Result<u8> {
    match format {
        Format::Json => {
            let mut rows: Vec<serde_json::Value> = PrimitiveKind::ALL
                .iter()
                .map(|k| json!({ "name": k.name(), "emits": "specification", "text": k.text() }))
                .collect();
            rows.push(json!({ "name": "q-element", "emits": "netlist" }));
            rows.push(json!({ "name": "token-ring", "emits": "manifest" }));
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Format::Text => {
            for kind in PrimitiveKind::ALL {
                println!("{}\t{}", kind.name(), kind.text());
            }
            println!("q-element\t(netlist)");
            println!("token-ring\t(decomposition manifest)");
        }
        Format::Dot => bail!("the listing comes as json or text, not dot"),
    }
    Ok(0)
}
