//! `eac`: run elections, slots, sessions and statistical checks from the
//! command line.
//!
//! Exit status is 0 on success, 2 on a usage error and 1 when a protocol
//! invariant is violated (for example a teleportation fidelity below
//! `1 - 1e-10`).

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use eac_core::circuits::leader_aware_circuit;
use eac_core::harness::{
    anonymity_experiment, fairness_csv, fairness_experiment, run_session, session_csv,
    HarnessError, Session,
};
use eac_core::protocol::elect;
use eac_core::{PayloadPolicy, RandomSource, SessionConfig, SlotKind};
use rayon::prelude::*;
use serde::Serialize;

/// Worst teleportation fidelity accepted before a run counts as broken.
const FIDELITY_FLOOR: f64 = 1.0 - 1e-10;

#[derive(Parser)]
#[command(name = "eac", version, about = "Entanglement access control simulator")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write output to this path instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    file: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leader election only: W measurement plus ancilla readout.
    Elect(Experiment),
    /// Uplink slots: the winner teleports to the orchestrator.
    Uplink(SlotArgs),
    /// Downlink slots: the orchestrator teleports to the winner.
    Downlink(SlotArgs),
    /// A repeating pattern of slots over fresh resources.
    Session(SessionArgs),
    /// Winner histogram and chi-square test against uniform.
    Fairness(Experiment),
    /// Exhaustive posterior check of what losers learn about the winner.
    Anonymity(AnonymityArgs),
    /// Print the leader-aware preparation circuit as a gate list.
    ExportCircuit(CircuitArgs),
}

#[derive(Args)]
struct Experiment {
    /// Number of end-nodes.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    out: Format,
}

#[derive(Args)]
struct SlotArgs {
    #[command(flatten)]
    experiment: Experiment,
    #[arg(long, value_enum, default_value_t = Payloads::Haar)]
    payloads: Payloads,
}

#[derive(Args)]
struct SessionArgs {
    #[command(flatten)]
    slot: SlotArgs,
    /// Comma-separated slot pattern repeated every trial, e.g. `D,U`.
    #[arg(long, value_delimiter = ',', default_value = "D,U")]
    slots: Vec<SlotKind>,
}

#[derive(Args)]
struct AnonymityArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "uplink")]
    slot: SlotKind,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long)]
    n: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Payloads {
    /// Haar-random qubit per node and slot.
    Haar,
    /// `|i mod 2⟩` for node `i`.
    Fixed,
}

impl From<Payloads> for PayloadPolicy {
    fn from(p: Payloads) -> Self {
        match p {
            Payloads::Haar => PayloadPolicy::HaarRandom,
            Payloads::Fixed => PayloadPolicy::FixedBasis,
        }
    }
}

enum Failure {
    Usage(String),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(msg) => Failure::Usage(msg),
            other => Failure::Internal(other.into()),
        }
    }
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn lines<T: Serialize>(values: &[T]) -> anyhow::Result<String> {
    let mut s = String::new();
    for v in values {
        s.push_str(&serde_json::to_string(v)?);
        s.push('\n');
    }
    Ok(s)
}

fn elect_cmd(args: &Experiment) -> Result<String, Failure> {
    if args.n == 0 || args.trials == 0 {
        return Err(Failure::Usage("n and trials must be at least 1".into()));
    }
    let elections = (0..args.trials)
        .into_par_iter()
        .map(|t| elect(args.n, &mut RandomSource::new(args.seed ^ t as u64)))
        .collect::<Result<Vec<_>, _>>()
        .context("election failed")?;
    if let Some(e) = elections.iter().find(|e| e.decoded != e.winner) {
        return Err(Failure::Internal(anyhow::anyhow!(
            "ancilla decoded {} but {} won",
            e.decoded,
            e.winner
        )));
    }
    Ok(match args.out {
        Format::Json => json(&elections)?,
        Format::Jsonl => lines(&elections)?,
        Format::Csv => {
            let mut s = String::from("trial,winner,w,ancilla\n");
            for (t, e) in elections.iter().enumerate() {
                let w = eac_core::fmt::bitstring(&e.w);
                let a = eac_core::fmt::bitstring(&e.ancilla);
                s.push_str(&format!("{t},{},{w},{a}\n", e.winner.0));
            }
            s
        }
    })
}

fn check_fidelity(session: &Session) -> anyhow::Result<()> {
    if let Some(r) = session.trace.iter().find(|r| r.fidelity < FIDELITY_FLOOR) {
        bail!("trial {} slot {} ({}) delivered fidelity {}", r.trial, r.slot, r.kind, r.fidelity);
    }
    if let Some(r) = session.trace.iter().find(|r| r.decoded != r.winner) {
        bail!(
            "trial {} slot {}: ancilla decoded {} but {} won",
            r.trial,
            r.slot,
            r.decoded,
            r.winner
        );
    }
    Ok(())
}

fn session_cmd(slot: &SlotArgs, slots: Vec<SlotKind>) -> Result<String, Failure> {
    let args = &slot.experiment;
    let config = SessionConfig {
        n: args.n,
        slots,
        trials: args.trials,
        seed: args.seed,
        payloads: slot.payloads.into(),
    };
    let session = run_session(&config)?;
    check_fidelity(&session)?;
    Ok(match args.out {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a SessionConfig,
                stats: &'a eac_core::SessionStats,
                trace: &'a [eac_core::TraceRecord],
            }
            json(&Out { config: &config, stats: &session.stats, trace: &session.trace })?
        }
        Format::Jsonl => session.trace_jsonl(),
        Format::Csv => session_csv(&session.stats),
    })
}

fn fairness_cmd(args: &Experiment) -> Result<String, Failure> {
    let report = fairness_experiment(args.n, args.trials, args.seed)?;
    if report.decode_mismatches > 0 {
        return Err(Failure::Internal(anyhow::anyhow!(
            "{} elections decoded the wrong winner",
            report.decode_mismatches
        )));
    }
    Ok(match args.out {
        Format::Json => json(&report)?,
        Format::Jsonl => lines(&[report])?,
        Format::Csv => fairness_csv(&report),
    })
}

fn anonymity_cmd(args: &AnonymityArgs) -> Result<String, Failure> {
    let report = anonymity_experiment(args.n, args.slot)?;
    if report.min_fidelity < FIDELITY_FLOOR {
        return Err(Failure::Internal(anyhow::anyhow!(
            "a branch delivered fidelity {}",
            report.min_fidelity
        )));
    }
    Ok(json(&report)?)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Elect(args) => elect_cmd(args),
        Command::Uplink(args) => session_cmd(args, vec![SlotKind::Uplink]),
        Command::Downlink(args) => session_cmd(args, vec![SlotKind::Downlink]),
        Command::Session(args) => session_cmd(&args.slot, args.slots.clone()),
        Command::Fairness(args) => fairness_cmd(args),
        Command::Anonymity(args) => anonymity_cmd(args),
        Command::ExportCircuit(args) => match leader_aware_circuit(args.n) {
            Ok(circuit) => Ok(circuit.to_text()),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
    }
}

fn emit(cli: &Cli, text: &str) -> anyhow::Result<()> {
    match &cli.file {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            Cli::command().error(ErrorKind::InvalidValue, "--jobs must be at least 1").exit();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = run(&cli).and_then(|text| emit(&cli, &text).map_err(Failure::Internal));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => Cli::command().error(ErrorKind::InvalidValue, msg).exit(),
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
