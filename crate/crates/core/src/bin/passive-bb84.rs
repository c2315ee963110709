use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueHint};

use passive_bb84::engine::{self, table, SweepConfig, PRESETS};
use passive_bb84::sps::photon_stats;
use passive_bb84::Error;

/// Key rates, optimal settings and cutoff distances of passive BB84 sources.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file overriding the preset.
    #[arg(long, value_hint = ValueHint::FilePath)]
    config: Option<PathBuf>,
    /// Named starting configuration (see `--preset help`).
    #[arg(long, default_value = "defaults")]
    preset: String,
    /// Write CSV here instead of stdout.
    #[arg(long, value_hint = ValueHint::FilePath)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rate and settings over the configured distance grid.
    Sweep(Common),
    /// Largest distance with a positive rate.
    Cutoff(Common),
    /// Rate and settings at one distance.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Distance in km.
        #[arg(long, allow_negative_numbers = true)]
        distance: f64,
    },
    /// Compare the closed-form single-photon model with the Fock-space simulation.
    Audit(Common),
    /// Mean photon number and g2 of the configured single-photon source.
    Stats(Common),
}

enum Failure {
    Config(String),
    Numerical(String),
    Audit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Audit(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Audit(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Domain { .. } | Error::Mode(_) => Failure::Config(e.to_string()),
            Error::NonConvergence { .. }
            | Error::Bracket { .. }
            | Error::DivisionByZero(_)
            | Error::Truncation { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<SweepConfig, Failure> {
    if common.preset == "help" {
        return Err(Failure::Config(format!("available presets: {}", PRESETS.join(", "))));
    }
    Ok(SweepConfig::load(Some(&common.preset), common.config.as_deref())?)
}

fn output(common: &Common) -> Result<Box<dyn Write>, Failure> {
    Ok(match &common.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep(common) => {
            let config = load(&common)?;
            let points = engine::sweep(&config)?;
            table::write_points(&points, output(&common)?)?;
        }
        Command::Cutoff(common) => {
            let config = load(&common)?;
            let km = engine::cutoff(&config)?;
            table::write_cutoff(config.scenario.name(), km, output(&common)?)?;
        }
        Command::Optimize { common, distance } => {
            let config = load(&common)?;
            let point = engine::optimize_at(&config, distance)?;
            table::write_points(&[point], output(&common)?)?;
        }
        Command::Audit(common) => {
            let config = load(&common)?;
            let report = engine::audit_oracle(&config)?;
            table::write_audit(&report, output(&common)?)?;
            if !report.passed() {
                return Err(Failure::Audit(format!(
                    "{} of {} cells exceed the threshold {:e} (max deviation {:e})",
                    report.failures().count(),
                    report.cells.len(),
                    report.threshold,
                    report.max_deviation()
                )));
            }
        }
        Command::Stats(common) => {
            let config = load(&common)?;
            let stats = photon_stats(&config.sps.distribution()?)?;
            table::write_stats(&stats, output(&common)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are configuration errors; clap's own code 2 means numerical here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
