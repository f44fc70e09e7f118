//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O errors (message on
//! standard error, nothing on standard output), 2 when the engine reports an
//! internal invariant violation.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::adversary::AttackStrategy;
use crate::harness::{run_simulation, BitSource, RunConfig, RunStats, SimError};
use crate::oracle::{attack_report, AttackReport, OracleError};
use crate::protocol::{ProtocolConfig, Variant};
use crate::rational::Rational;
use crate::render;

#[derive(Debug, Parser)]
#[command(
    name = "pingpong",
    version,
    about = "Ping-pong protocol simulator and exact attack analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run.
    Run(RunArgs),
    /// Exact per-round analysis.
    Oracle(OracleArgs),
    /// Oracle (and optionally Monte Carlo) over a parameter grid, as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    C0,
    ControlProb,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::C0 => "c0",
            SweepParam::ControlProb => "control-prob",
        }
    }
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    #[arg(long, default_value = "original", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value = "none", value_parser = parse_attack)]
    attack: AttackStrategy,
    /// Share of control rounds, as a fraction (1/2) or decimal (0.5).
    #[arg(long, default_value = "1/2", value_parser = parse_probability)]
    control_prob: Rational,
    /// Share of control rounds that measure in Bz (modified variant).
    #[arg(long, default_value = "1/2", value_parser = parse_probability)]
    c0: Rational,
    /// Bob acknowledges receipt before Alice announces (modified variant).
    #[arg(long, value_enum, default_value = "on")]
    receipt: Switch,
}

impl ProtocolArgs {
    fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            variant: self.variant,
            control_prob: self.control_prob.clone(),
            sendback_split: self.c0.clone(),
            receipt_enabled: self.receipt == Switch::On,
            phi_counts_as_detection: true,
        }
    }

    fn echo(&self, m: &mut Map<String, Value>) {
        m.insert("variant".into(), json!(self.variant.name()));
        m.insert("attack".into(), json!(self.attack.name()));
        m.insert("control_prob".into(), json!(self.control_prob.to_string()));
        m.insert("c0".into(), json!(self.c0.to_string()));
        let receipt = if self.receipt == Switch::On { "on" } else { "off" };
        m.insert("receipt".into(), json!(receipt));
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, default_value_t = 1000)]
    rounds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `random` or `pattern:<0/1 string>`, cycled over message rounds.
    #[arg(long, default_value = "random", value_parser = parse_bits)]
    bits: BitSource,
    #[arg(long)]
    stop_on_detection: bool,
    /// JSON destination; `-` is standard output (the default).
    #[arg(long)]
    json: Option<String>,
    /// Per-round transcript CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    json: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, value_enum)]
    param: SweepParam,
    #[arg(long, value_parser = parse_probability)]
    from: Rational,
    #[arg(long, value_parser = parse_probability)]
    to: Rational,
    #[arg(long)]
    steps: usize,
    /// Also run a Monte Carlo simulation of this many rounds per grid point.
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "random", value_parser = parse_bits)]
    bits: BitSource,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: crate::protocol::ConfigError| e.to_string())
}

fn parse_attack(s: &str) -> Result<AttackStrategy, String> {
    s.parse().map_err(|e: crate::adversary::UnknownStrategy| e.to_string())
}

fn parse_probability(s: &str) -> Result<Rational, String> {
    let r: Rational = s.parse().map_err(|e: crate::rational::RationalError| e.to_string())?;
    if !r.is_probability() {
        return Err(format!("{s} is not a probability in [0, 1]"));
    }
    Ok(r)
}

fn parse_bits(s: &str) -> Result<BitSource, String> {
    if s == "random" {
        return Ok(BitSource::UniformRandom);
    }
    let pattern = s
        .strip_prefix("pattern:")
        .ok_or_else(|| format!("expected `random` or `pattern:<bits>`, got {s:?}"))?;
    if pattern.is_empty() {
        return Err("bit pattern is empty".into());
    }
    pattern
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(format!("bit pattern may only contain 0 and 1, found {other:?}")),
        })
        .collect::<Result<Vec<u8>, String>>()
        .map(BitSource::FixedPattern)
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Engine(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Engine(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Engine(m) => m,
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Config(c) => Failure::Config(c.to_string()),
            OracleError::Engine(e) => Failure::Engine(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c.to_string()),
            engine @ SimError::Engine { .. } => Failure::Engine(engine.to_string()),
        }
    }
}

fn io_failure(path: &str, e: std::io::Error) -> Failure {
    Failure::Config(format!("cannot write {path}: {e}"))
}

/// Writes `text` to `dest` (`None` or `-` meaning `out`).
fn emit(dest: Option<&str>, text: &[u8], out: &mut dyn Write) -> Result<(), Failure> {
    match dest {
        None | Some("-") => out.write_all(text).map_err(|e| io_failure("standard output", e)),
        Some(path) => std::fs::write(path, text).map_err(|e| io_failure(path, e)),
    }
}

fn open_csv(path: &PathBuf) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(&path.display().to_string(), e))
}

fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let report = attack_report(&args.protocol.protocol(), args.protocol.attack)?;
    let mut config = Map::new();
    config.insert("subcommand".into(), json!("oracle"));
    args.protocol.echo(&mut config);
    let doc = render::oracle_document(Value::Object(config), &report);
    emit(args.json.as_deref(), render::to_json_text(&doc).as_bytes(), out)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let protocol = args.protocol.protocol();
    let config = RunConfig {
        protocol: protocol.clone(),
        strategy: args.protocol.attack,
        rounds: args.rounds,
        seed: args.seed,
        bits: args.bits.clone(),
        stop_on_detection: args.stop_on_detection,
    };
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    // Open the transcript file before doing any work so a bad path fails fast.
    let csv_out = args.csv.as_ref().map(open_csv).transpose()?;
    let output = run_simulation(&config, csv_out.is_some())?;
    let report = attack_report(&protocol, args.protocol.attack)?;

    if let (Some(w), Some(records)) = (csv_out, output.transcript.as_deref()) {
        let path = args.csv.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        render::write_transcript(records, w).map_err(|e| io_failure(&path, e))?;
    }

    let mut echo = Map::new();
    echo.insert("subcommand".into(), json!("run"));
    args.protocol.echo(&mut echo);
    echo.insert("rounds".into(), json!(args.rounds));
    echo.insert("seed".into(), json!(args.seed));
    echo.insert("bits".into(), json!(args.bits.describe()));
    echo.insert("stop_on_detection".into(), json!(args.stop_on_detection));
    let doc = render::run_document(Value::Object(echo), &output.stats, Some(&report));
    emit(args.json.as_deref(), render::to_json_text(&doc).as_bytes(), out)
}

/// `steps` evenly spaced exact values from `from` to `to`, inclusive.
fn grid(from: &Rational, to: &Rational, steps: usize) -> Vec<Rational> {
    if steps == 1 {
        return vec![from.clone()];
    }
    let span = to.clone() - from.clone();
    let last = Rational::new(steps as i64 - 1, 1);
    (0..steps)
        .map(|i| from.clone() + span.clone() * Rational::new(i as i64, 1) / last.clone())
        .collect()
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if args.steps == 0 {
        return Err(Failure::Config("--steps must be at least 1".into()));
    }
    if args.rounds == Some(0) {
        return Err(Failure::Config("--rounds must be at least 1".into()));
    }
    let base = args.protocol.protocol();
    let points: Vec<(Rational, ProtocolConfig)> = grid(&args.from, &args.to, args.steps)
        .into_iter()
        .map(|v| {
            let mut p = base.clone();
            match args.param {
                SweepParam::C0 => p.sendback_split = v.clone(),
                SweepParam::ControlProb => p.control_prob = v.clone(),
            }
            (v, p)
        })
        .collect();

    let results: Vec<(AttackReport, Option<RunStats>)> = points
        .par_iter()
        .map(|(_, protocol)| -> Result<_, Failure> {
            let report = attack_report(protocol, args.protocol.attack)?;
            let stats = match args.rounds {
                Some(rounds) => {
                    let cfg = RunConfig {
                        protocol: protocol.clone(),
                        strategy: args.protocol.attack,
                        rounds,
                        seed: args.seed,
                        bits: args.bits.clone(),
                        stop_on_detection: false,
                    };
                    Some(run_simulation(&cfg, false)?.stats)
                }
                None => None,
            };
            Ok((report, stats))
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<render::SweepRow<'_>> = points
        .iter()
        .zip(&results)
        .map(|((v, _), (report, stats))| render::SweepRow {
            param: args.param.name(),
            value: v,
            report,
            stats: stats.as_ref(),
        })
        .collect();
    let mut buf = Vec::new();
    render::write_sweep(&rows, &mut buf).map_err(|e| io_failure("sweep buffer", e))?;
    match &args.csv {
        Some(path) => std::fs::write(path, &buf).map_err(|e| io_failure(&path.display().to_string(), e)),
        None => out.write_all(&buf).map_err(|e| io_failure("standard output", e)),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.exit_code()
        }
    }
}
