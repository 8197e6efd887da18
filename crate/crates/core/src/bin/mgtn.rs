use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mgtn::cli::{self, CliError, Overrides, RunConfig};
use mgtn::market::{SynthKind, SynthSpec};

#[derive(Parser)]
#[command(name = "mgtn", version, about = "Multi-graph tensor network trading agent")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint greedily on the test split.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write a synthetic price CSV.
    Synth {
        #[arg(long)]
        kind: SynthKind,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.001)]
        magnitude: f64,
    },
    /// Summarize a checkpoint or a carry table.
    Inspect { path: PathBuf },
}

fn run(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Train { config, seed, out } => {
            let overrides = Overrides { seed, output_dir: out };
            let dir = cli::cmd_train(RunConfig::load(&config)?, &overrides)?;
            println!("{}", dir.display());
        }
        Command::Backtest { config, checkpoint } => {
            let report = cli::cmd_backtest(&RunConfig::load(&config)?, &checkpoint)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Synth {
            kind,
            length,
            seed,
            out,
            noise,
            magnitude,
        } => {
            let spec = SynthSpec {
                kind,
                length,
                seed,
                noise,
                magnitude,
                ..SynthSpec::default()
            };
            cli::cmd_synth(&spec, &out)?;
        }
        Command::Inspect { path } => print!("{}", cli::cmd_inspect(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
