//! `recomb`: exact analysis of recombination dynamics from a JSON problem
//! document.

mod commands;
mod problem;
mod render;

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use recomb_core::chain::DEFAULT_MAX_STATES;
use recomb_core::measures::DEFAULT_MAX_DENSE;
use recomb_core::{Error, ErrorKind};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{Options, Outcome};
use problem::{ProblemDoc, SimulationDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "recomb", version, about = "Exact recombination dynamics on finite site sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output style.
    #[arg(long, value_enum, default_value = "human", global = true)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Largest chain to enumerate.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES, global = true)]
    max_states: usize,
    /// Largest dense measure table.
    #[arg(long, default_value_t = DEFAULT_MAX_DENSE, global = true)]
    max_dense: usize,
    /// Steps covered by survival profiles and limit checks.
    #[arg(long, default_value_t = 20, global = true)]
    horizon: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closure of the support and the atom partition.
    Atoms { input: PathBuf },
    /// Per-block coefficients and split laws.
    Coeffs { input: PathBuf },
    /// Iterate the operator on the initial measure and check the tree decomposition.
    Evolve {
        input: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// States, transition matrix and survival profile of the partition chain.
    Chain { input: PathBuf },
    /// Decay rate, conditioned limits and the conditioned process.
    Qsd { input: PathBuf },
    /// Monte Carlo run of the partition chain.
    Simulate {
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trajectories: Option<u64>,
        /// `chain` or `kernel`.
        #[arg(long)]
        mode: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Atoms { .. } => "atoms",
            Command::Coeffs { .. } => "coeffs",
            Command::Evolve { .. } => "evolve",
            Command::Chain { .. } => "chain",
            Command::Qsd { .. } => "qsd",
            Command::Simulate { .. } => "simulate",
        }
    }

    fn input(&self) -> &PathBuf {
        match self {
            Command::Atoms { input }
            | Command::Coeffs { input }
            | Command::Evolve { input, .. }
            | Command::Chain { input }
            | Command::Qsd { input }
            | Command::Simulate { input, .. } => input,
        }
    }
}

fn read_input(path: &PathBuf) -> Result<String, Error> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Error::InvalidInput(format!("cannot read standard input: {e}")))?;
        return Ok(text);
    }
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: &Cli, text: &str) -> Result<Outcome, Error> {
    let problem = ProblemDoc::from_json(text)?.into_problem(cli.max_dense)?;
    let opts = Options {
        max_states: cli.max_states,
        horizon: cli.horizon,
    };
    match &cli.command {
        Command::Atoms { .. } => commands::atoms(&problem),
        Command::Coeffs { .. } => commands::coeffs(&problem),
        Command::Evolve { steps, .. } => {
            let steps = steps.or(problem.steps).unwrap_or(1);
            commands::evolve(&problem, steps)
        }
        Command::Chain { .. } => commands::chain_report(&problem, &opts),
        Command::Qsd { .. } => commands::qsd_report(&problem, &opts),
        Command::Simulate {
            seed,
            trajectories,
            mode,
            ..
        } => {
            let overrides = SimulationDoc {
                seed: *seed,
                trajectories: *trajectories,
                horizon: Some(cli.horizon),
                mode: mode.clone(),
            };
            commands::simulate(&problem, &opts, &overrides)
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation | ErrorKind::NotApplicable => 2,
        ErrorKind::Resource => 3,
        ErrorKind::Invariant => 4,
    }
}

fn emit(cli: &Cli, document: &serde_json::Value) -> io::Result<()> {
    let text = match cli.format {
        Format::Machine => {
            let mut t = serde_json::to_string_pretty(document).expect("reports serialize");
            t.push('\n');
            t
        }
        Format::Human => render::human(document),
    };
    match &cli.out {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match read_input(cli.command.input()) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(e.kind()));
        }
    };
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    let outcome = match run(&cli, &text) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(e.kind()));
        }
    };
    let document = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "input_sha256": digest,
        "report": outcome.body,
    });
    if let Err(e) = emit(&cli, &document) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    if outcome.failed() {
        for check in outcome.checks.iter().filter(|c| !c.passed()) {
            eprintln!("invariant violated: {check}");
        }
        return ExitCode::from(4);
    }
    ExitCode::SUCCESS
}
