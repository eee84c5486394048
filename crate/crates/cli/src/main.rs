use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use senselabel::config::Overrides;
use senselabel::Command;

#[derive(Parser)]
#[command(
    name = "senselabel",
    about = "Turns unlabeled accelerometer recordings into class annotations: \
             contrastive pre-training, low-dimensional projection, few-shot \
             prompting, evaluation.",
    version
)]
struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true, default_value = "senselabel.toml")]
    config: PathBuf,

    /// Override [run].out_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Override the run id (defaults to run-<config hash prefix>).
    #[arg(long, global = true)]
    run_id: Option<String>,

    /// Override [dataset].path.
    #[arg(long, global = true)]
    dataset_path: Option<PathBuf>,

    /// Override [annotate].backend: oracle, mock, or live.
    #[arg(long, global = true)]
    backend: Option<String>,

    /// Override [projection].dims (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    dims: Option<Vec<usize>>,

    /// Override [annotate].metrics (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    metrics: Option<Vec<String>>,

    /// Override [annotate].example_counts (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    examples: Option<Vec<usize>>,

    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Parse the dataset, window it, split by held-out subject, normalize.
    Ingest,
    /// Contrastive pre-training of the encoder (runs ingest if needed).
    Pretrain,
    /// Embed train and test windows with the trained encoder.
    Encode,
    /// Project embeddings to each configured prompt dimension.
    Project,
    /// Render prompts and run the configured annotation backend per cell.
    Annotate,
    /// Score annotations against ground truth; write reports per cell.
    Evaluate,
    /// Sweep all dims x metrics x example counts, then summarize.
    Grid,
}

impl CliCommand {
    fn into_command(self) -> Command {
        match self {
            CliCommand::Ingest => Command::Ingest,
            CliCommand::Pretrain => Command::Pretrain,
            CliCommand::Encode => Command::Encode,
            CliCommand::Project => Command::Project,
            CliCommand::Annotate => Command::Annotate,
            CliCommand::Evaluate => Command::Evaluate,
            CliCommand::Grid => Command::Grid,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        out_dir: cli.out_dir,
        run_id: cli.run_id,
        backend: cli.backend,
        dims: cli.dims,
        metrics: cli.metrics,
        example_counts: cli.examples,
        dataset_path: cli.dataset_path,
    };
    match senselabel::run_command(cli.command.into_command(), &cli.config, &overrides) {
        Ok(resolved) => {
            println!("run {} complete: {}", resolved.run_id, resolved.run_dir.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.one_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
