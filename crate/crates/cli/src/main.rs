use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::{CliError, CommandOutcome};

/// Build, evaluate, invert and attack rank-one pure-state tomography POVMs.
#[derive(Debug, Parser)]
#[command(name = "psicomplete", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Numerical tolerance (defaults depend on the command).
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Seed for anything random.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output path; `-` is standard output.
    #[arg(short = 'o', long = "out", global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the 2d-element POVM (and its pre-normalized operators).
    Build {
        #[arg(short = 'd', long = "d")]
        d: usize,
    },
    /// Print outcome probabilities of a state.
    Probs {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
    /// Recover a state from probabilities, counts or operator-frame values.
    Reconstruct {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long, group = "data")]
        probs: Option<PathBuf>,
        #[arg(long, group = "data")]
        counts: Option<PathBuf>,
        #[arg(long, group = "data")]
        expectations: Option<PathBuf>,
        /// Companion pre-normalized operator file, for ingested POVMs.
        #[arg(long)]
        operators: Option<PathBuf>,
    },
    /// List the sign-flip ambiguities of a state.
    Certify {
        #[arg(long)]
        state: PathBuf,
        /// Map the state into the operator frame of this POVM first.
        #[arg(long)]
        povm: Option<PathBuf>,
    },
    /// Search for two distinct states with identical outcome probabilities.
    Attack {
        #[arg(long)]
        povm: PathBuf,
        #[arg(long)]
        phi: Option<PathBuf>,
        /// Comma-separated element indices summed to find the probe.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
    },
    /// Round-trip Haar-random states for each dimension in a range.
    Sweep {
        /// A dimension `3` or an inclusive range `2..4`.
        #[arg(long = "d")]
        d: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        shots: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<CommandOutcome, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Build { d } => commands::build(g, d),
        Command::Probs { povm, state } => commands::probs(g, &povm, &state),
        Command::Reconstruct {
            povm,
            probs,
            counts,
            expectations,
            operators,
        } => {
            let data = match (probs, counts, expectations) {
                (Some(p), None, None) => commands::DataSource::Probs(p),
                (None, Some(c), None) => commands::DataSource::Counts(c),
                (None, None, Some(e)) => commands::DataSource::Expectations(e),
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --probs, --counts, --expectations is required".into(),
                    ))
                }
            };
            commands::reconstruct(g, &povm, data, operators.as_deref())
        }
        Command::Certify { state, povm } => commands::certify(g, &state, povm.as_deref()),
        Command::Attack { povm, phi, subset } => commands::attack(g, &povm, phi.as_deref(), subset.as_deref()),
        Command::Sweep { d, samples, shots } => commands::sweep(g, &d, samples, shots),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for path in &outcome.artifacts_written {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
