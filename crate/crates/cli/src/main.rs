mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{DiagnoseArgs, EvaluateArgs, IngestArgs, Mode, TrainArgs};
use error::CliResult;

#[derive(Parser)]
#[command(name = "diffgt", version, about = "Graph diffusion recommender: ingest, train, evaluate, diagnose")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse interactions and side information into a dataset bundle.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        /// Item side information.
        #[arg(long)]
        side: Option<PathBuf>,
        #[arg(long)]
        user_side: Option<PathBuf>,
        /// Seed of the train/validation/test split.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ablation variant, e.g. -Direction or -DiffL.
        #[arg(long, allow_hyphen_values = true)]
        ablate: Option<String>,
    },
    /// Recall@k and NDCG@k on every test draw.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Bundle directory or file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = diffgt::eval::DEFAULT_K)]
        k: usize,
        /// Defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separability curves, spectrum export or timing table.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Synthetic graph size for timing.
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = diffgt::eval::DEFAULT_K)]
        k: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest {
            data,
            side,
            user_side,
            seed,
            out,
        } => commands::cmd_ingest(&IngestArgs {
            data,
            side,
            user_side,
            seed,
            out,
        }),
        Command::Train { config, out, ablate } => commands::cmd_train(&TrainArgs { config, out, ablate }),
        Command::Evaluate { checkpoint, data, k, out } => commands::cmd_evaluate(&EvaluateArgs {
            checkpoint,
            data,
            k,
            out,
        }),
        Command::Diagnose {
            checkpoint,
            data,
            mode,
            out,
            nodes,
            repeats,
            k,
        } => commands::cmd_diagnose(&DiagnoseArgs {
            checkpoint,
            data,
            mode,
            out,
            nodes,
            repeats,
            k,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
