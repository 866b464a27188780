use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use trust_cli::config::Mode;
use trust_cli::{run, CliError, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Simulate,
    FitDist,
    FitCopula,
    PseudoObs,
    Dependence,
    Score,
    DensityGrid,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Simulate => Mode::Simulate,
            Command::FitDist => Mode::FitDist,
            Command::FitCopula => Mode::FitCopula,
            Command::PseudoObs => Mode::PseudoObs,
            Command::Dependence => Mode::Dependence,
            Command::Score => Mode::Score,
            Command::DensityGrid => Mode::DensityGrid,
        }
    }
}

/// Fits and explores truncated-skew-t distributions and copulas.
#[derive(Parser, Debug)]
#[command(name = "trust", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::load(&args.config).and_then(|mut cfg| {
        let mode = Mode::from(args.command);
        if cfg.mode != mode {
            return Err(CliError::validation(format!(
                "config mode {:?} does not match the command {:?}",
                cfg.mode, mode
            )));
        }
        cfg.apply_overrides(args.seed, args.out);
        run(&cfg)
    });
    match result {
        Ok(outputs) => {
            for name in outputs.names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
