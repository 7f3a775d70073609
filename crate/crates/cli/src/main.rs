//! `groundtherm` batch front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use groundtherm::io::IngestUnits;
use groundtherm::pipeline::{Mode, RunOptions, Setup};
use groundtherm::Error;

#[derive(Parser)]
#[command(name = "groundtherm", version, about = "Ground thermal property estimation from buried temperature sensors")]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
}

#[derive(Subcommand)]
enum Stage {
    /// Solve the forward problem at the configured material and h(t).
    Forward(Common),
    /// Reduced sensitivities of the sensor temperatures to every parameter.
    Sensitivity(Common),
    /// Generate twin-experiment data from the configured truth.
    Synth(Common),
    /// Run the Metropolis-Hastings chains and summarize them.
    Estimate(Common),
    /// Convergence diagnostics for the chains under --out.
    Diagnose(Common),
    /// Residuals at the posterior mean stored under --out.
    Residuals(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    chains: u64,
    /// Prior structure: caseAB or caseC.
    #[arg(long, default_value = "caseAB")]
    mode: Mode,
    /// Input time columns are in hours.
    #[arg(long)]
    hours: bool,
    /// Input temperatures are in degrees Celsius.
    #[arg(long)]
    celsius: bool,
    /// Moving-average window applied to the net radiation, s.
    #[arg(long, value_name = "WINDOW_S")]
    filter_radiation: Option<f64>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

fn run(stage: &Stage) -> groundtherm::Result<Vec<PathBuf>> {
    let c = match stage {
        Stage::Forward(c)
        | Stage::Sensitivity(c)
        | Stage::Synth(c)
        | Stage::Estimate(c)
        | Stage::Diagnose(c)
        | Stage::Residuals(c) => c,
    };
    let options = RunOptions {
        seed: c.seed,
        chains: c.chains as usize,
        mode: c.mode,
        units: IngestUnits {
            hours: c.hours,
            celsius: c.celsius,
        },
        filter_radiation: c.filter_radiation,
        command: std::env::args().collect(),
    };
    let setup = Setup::load(&c.config, options)?;
    match stage {
        Stage::Forward(_) => setup.forward(&c.out),
        Stage::Sensitivity(_) => setup.sensitivity(&c.out),
        Stage::Synth(_) => setup.synth(&c.out),
        Stage::Estimate(_) => setup.estimate(&c.out),
        Stage::Diagnose(_) => setup.diagnose(&c.out),
        Stage::Residuals(_) => setup.residuals_stage(&c.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli.stage) {
        Ok(outputs) => {
            for p in outputs {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
