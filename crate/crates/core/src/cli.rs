//! The `ssagg` command line.
//!
//! `run` executes a scenario and writes the run report, the trace and the
//! output envelopes; `inspect` lists a saved trace. Exit status: 0 when every
//! assertion holds, 1 when one fails, 2 for unusable input.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::aggregator::{Mode, RunReport};
use crate::canonical;
use crate::crypto::ProviderKind;
use crate::ledger::TxKind;
use crate::netsim::{run_scenario_with, Check, RunOptions, ScenarioConfig, ScenarioResult, SimError, Trace, TraceEvent};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Scenarios shipped with the binary, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("neuroscience", include_str!("../scenarios/neuroscience.json")),
    ("onchain-basic", include_str!("../scenarios/onchain-basic.json")),
    ("adversary-suite", include_str!("../scenarios/adversary-suite.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[derive(Debug, Parser)]
#[command(name = "ssagg", version, about = "Simulate decentralized data aggregation over self-sovereign identity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file or a bundled scenario
    Run(RunArgs),
    /// List events of a saved trace
    Inspect(InspectArgs),
    /// List the bundled scenarios
    Scenarios,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to a scenario file, or the name of a bundled scenario
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.json, trace.jsonl, ledger.log and outputs
    #[arg(long)]
    pub out: PathBuf,
    /// Run every acquisition in this mode
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Stop a run at the first excluded source
    #[arg(long)]
    pub strict_termination: bool,
    /// Print a human-readable summary instead of the canonical report
    #[arg(long)]
    pub pretty: bool,
    /// One thread per actor; the trace is then not reproducible
    #[arg(long)]
    pub threaded: bool,
    /// Crypto provider: deterministic or system
    #[arg(long, env = ProviderKind::ENV_VAR, default_value = "deterministic", value_parser = parse_provider)]
    pub crypto: ProviderKind,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub trace: PathBuf,
    #[arg(long)]
    pub step: Option<u8>,
    /// DID or address an event must involve
    #[arg(long)]
    pub actor: Option<String>,
    /// ciphertext, plaintext, plaintext-metadata or plaintext-data
    #[arg(long)]
    pub payload_class: Option<String>,
    /// Ledger transaction kind, e.g. tau_e or endorsement
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<TxKind>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<TxKind, String> {
    s.parse()
}

#[derive(Debug, Serialize)]
struct RunFile<'a> {
    name: &'a str,
    report: &'a RunReport,
    ledger_before: usize,
    ledger_after: usize,
    checks: &'a [Check],
    passed: bool,
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    scenario: &'a str,
    seed: u64,
    passed: bool,
    trace_digest: String,
    runs: Vec<RunFile<'a>>,
}

/// Parses arguments and runs; returns the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    execute(cli, out, err)
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, out),
        Command::Inspect(args) => cmd_inspect(&args, out),
        Command::Scenarios => {
            for (name, text) in BUNDLED {
                let description = ScenarioConfig::from_json(text).map(|c| c.description).unwrap_or_default();
                let _ = writeln!(out, "{name:<18} {description}");
            }
            Ok(EXIT_OK)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Reads a scenario from a path, falling back to the bundled ones.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig, String> {
    let path = Path::new(spec);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| format!("{spec}: {e}"))?
    } else if let Some(text) = bundled(spec) {
        text.to_string()
    } else {
        return Err(format!("{spec}: no such file or bundled scenario"));
    };
    ScenarioConfig::from_json(&text).map_err(|e| format!("{spec}: {e}"))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, String> {
    let config = load_scenario(&args.scenario)?;
    let options = RunOptions {
        mode: args.mode,
        strict: args.strict_termination.then_some(true),
        provider: args.crypto,
        threaded: args.threaded,
    };
    let result = match run_scenario_with(&config, args.seed, &options) {
        Ok(r) => r,
        Err(SimError::Config(e)) => return Err(format!("{}: {e}", args.scenario)),
        Err(e) => {
            let _ = writeln!(out, "run failed: {e}");
            return Ok(EXIT_ASSERTION);
        }
    };
    write_outputs(&args.out, &result).map_err(|e| format!("{}: {e}", args.out.display()))?;
    if args.pretty {
        print_pretty(&result, out).map_err(|e| e.to_string())?;
    } else {
        writeln!(out, "{}", report_json(&result)).map_err(|e| e.to_string())?;
    }
    Ok(if result.passed() { EXIT_OK } else { EXIT_ASSERTION })
}

/// The canonical run report for a scenario result, as written to `report.json`.
pub fn report_json(result: &ScenarioResult) -> String {
    canonical::to_string(&report_file(result)).expect("reports always serialize")
}

fn report_file(result: &ScenarioResult) -> ReportFile<'_> {
    ReportFile {
        scenario: &result.name,
        seed: result.seed,
        passed: result.passed(),
        trace_digest: result.trace.digest().to_hex(),
        runs: result
            .runs
            .iter()
            .map(|r| RunFile {
                name: &r.name,
                report: &r.outcome.report,
                ledger_before: r.ledger_before,
                ledger_after: r.ledger_after,
                checks: &r.checks,
                passed: r.passed(),
            })
            .collect(),
    }
}

fn write_outputs(dir: &Path, result: &ScenarioResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report_json(result) + "\n")?;
    result.trace.write_lines(io::BufWriter::new(fs::File::create(dir.join("trace.jsonl"))?))?;
    result.world.ledger().export_log(io::BufWriter::new(fs::File::create(dir.join("ledger.log"))?))?;
    for r in &result.runs {
        if let Some(output) = &r.outcome.output {
            let text = canonical::to_string(output).map_err(io::Error::other)?;
            fs::write(dir.join(format!("output-{}.json", r.name)), text + "\n")?;
        }
    }
    Ok(())
}

fn print_pretty(result: &ScenarioResult, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "scenario {} (seed {})", result.name, result.seed)?;
    for r in &result.runs {
        let rep = &r.outcome.report;
        writeln!(
            out,
            "\n{} [{} {}]  ledger +{}",
            r.name,
            rep.mode,
            rep.run,
            r.ledger_after - r.ledger_before
        )?;
        for s in &rep.sources {
            let name = result.world.names().find(|n| result.world.did(n) == Some(&s.source)).unwrap_or("?");
            let status = match s.status.reason() {
                Some(reason) => reason.to_string(),
                None => format!("{:?}", s.status).to_lowercase(),
            };
            writeln!(out, "  {name:<20} {status}")?;
        }
        match (&r.outcome.output, &rep.error) {
            (Some(o), _) => writeln!(out, "  output: {} records", o.payload.len())?,
            (None, Some(e)) => writeln!(out, "  no output: {e}")?,
            (None, None) => writeln!(out, "  no output")?,
        }
        for c in &r.checks {
            writeln!(out, "  [{}] {}", if c.passed { "ok" } else { "FAIL" }, c.what)?;
        }
    }
    writeln!(out, "\n{}", if result.passed() { "all assertions hold" } else { "some assertions failed" })
}

fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<i32, String> {
    let file = fs::File::open(&args.trace).map_err(|e| format!("{}: {e}", args.trace.display()))?;
    let trace = Trace::read_lines(BufReader::new(file)).map_err(|e| format!("{}: {e}", args.trace.display()))?;
    for record in filter(&trace, args) {
        match writeln!(out, "{}", describe(record.index, &record.event)) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => break,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(EXIT_OK)
}

/// Events of `trace` passing every filter in `args`, in trace order.
pub fn filter<'a>(trace: &'a Trace, args: &'a InspectArgs) -> impl Iterator<Item = &'a crate::netsim::TraceRecord> {
    trace.records().iter().filter(move |r| {
        let e = &r.event;
        if matches!(e, TraceEvent::Deliver { .. } | TraceEvent::Tick { .. })
            && (args.step.is_some() || args.actor.is_some() || args.payload_class.is_some() || args.kind.is_some())
        {
            return false;
        }
        args.step.is_none_or(|s| e.step() == Some(s))
            && args.actor.as_deref().is_none_or(|a| e.involves(a))
            && args
                .payload_class
                .as_deref()
                .is_none_or(|c| e.class().is_some_and(|class| class.as_str().starts_with(c)))
            && args.kind.is_none_or(|k| matches!(e, TraceEvent::Ledger { kind, .. } if *kind == k))
    })
}

fn describe(index: u64, e: &TraceEvent) -> String {
    match e {
        TraceEvent::Send { seq, from, to, port, step, label, class, payload } => format!(
            "{index:>6}  step {step:>2}  send    #{seq} {label} {from} -> {to} ({port}) [{}, {} bytes]",
            class.as_str(),
            payload.len()
        ),
        TraceEvent::Drop { seq, from, to, step, label, reason, .. } => {
            format!("{index:>6}  step {step:>2}  drop    #{seq} {label} {from} -> {to}: {reason}")
        }
        TraceEvent::Deliver { seq } => format!("{index:>6}           deliver #{seq}"),
        TraceEvent::Ledger { actor, step, kind, tx, finalized, accepted } => format!(
            "{index:>6}  step {step:>2}  ledger  {kind} {tx} by {actor} ({}, {accepted} accepted)",
            if *finalized { "finalized" } else { "not finalized" }
        ),
        TraceEvent::Note { actor, run, step, text } => format!("{index:>6}  step {step:>2}  note    {run} {actor}: {text}"),
        TraceEvent::Tick { idle } => format!("{index:>6}           tick    idle {idle}"),
    }
}
