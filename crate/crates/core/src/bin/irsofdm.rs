use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use irs_ofdm::altopt::Scheme;
use irs_ofdm::error::Error;
use irs_ofdm::harness::config::{load_config, ConfigFile};
use irs_ofdm::harness::{run_experiment, ExperimentKind, ExperimentSpec};

#[derive(Parser)]
#[command(name = "irsofdm", version, about = "Rate experiments for reflect-array assisted OFDM links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV plus a `.config.json` sidecar.
    Run {
        #[arg(long, value_parser = parse_kind)]
        experiment: ExperimentKind,
        /// JSON file with system and channel settings; `{}` keeps defaults.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
        /// Gaussian randomization candidates for the SDR initialization.
        #[arg(long = "q-rand")]
        q_rand: Option<usize>,
        /// Exponential decay rate of the tap power profile.
        #[arg(long)]
        decay: Option<f64>,
        /// Comma-separated subset of iterative, cpm_init, random_phase, no_irs.
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
        schemes: Option<Vec<Scheme>>,
    },
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SolverFailed { .. } => EXIT_SOLVER,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        Error::InvalidInput(_) | Error::Dimension { .. } | Error::Json(_) => EXIT_CONFIG,
    }
}

fn fail(err: Error, code: u8) -> ExitCode {
    eprintln!("irsofdm: {err}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let Command::Run {
        experiment,
        config,
        seed,
        out,
        realizations,
        q_rand,
        decay,
        schemes,
    } = Cli::parse().command;

    let file: ConfigFile = match load_config(&config) {
        Ok(f) => f,
        Err(e @ Error::Io(_)) => return fail(e, EXIT_IO),
        Err(e) => return fail(e, EXIT_CONFIG),
    };
    let mut spec = ExperimentSpec::new(experiment, &file, out);
    spec.base.seed = seed;
    if let Some(r) = realizations {
        spec.realizations = r;
    }
    if let Some(q) = q_rand {
        spec.base.q_rand = q;
    }
    if let Some(d) = decay {
        spec.channel.decay_rate = d;
    }
    if let Some(s) = schemes {
        spec.schemes = s;
    }
    if let Err(e) = spec.validate() {
        return fail(e, EXIT_CONFIG);
    }

    match run_experiment(&spec) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            fail(e, code)
        }
    }
}
