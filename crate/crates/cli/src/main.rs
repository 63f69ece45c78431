use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dbnwp_cli::commands::{
    cmd_compare, cmd_evaluate, cmd_predict, cmd_synthesize, cmd_train, EvalMode,
};
use dbnwp_cli::config::{parse_release_policy, TrainingFlags};
use dbnwp_cli::CliError;
use dbnwp_core::dataset::ReleasePolicy;

/// Wind-power forecasting with stacked-RBM networks: train on hourly farm
/// CSVs, predict next-hour power, and evaluate under k-fold, hold-out, or
/// multi-seed stability protocols.
#[derive(Parser)]
#[command(name = "dbnwp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hourly farm series
    Synthesize {
        /// Number of hourly records
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain and fine-tune a model on one farm CSV
    Train {
        /// Input farm CSV
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        flags: TrainingFlags,
        /// Duplicate-timestamp handling: strict, latest, or average
        #[arg(long, default_value = "latest", value_parser = parse_release_policy)]
        release_policy: ReleasePolicy,
        /// Output directory for the model and trace CSVs
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict next-hour power for every valid window of a farm CSV
    Predict {
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Input farm CSV
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "latest", value_parser = parse_release_policy)]
        release_policy: ReleasePolicy,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a validation protocol and write report CSVs
    Evaluate {
        /// Input farm CSV
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        flags: TrainingFlags,
        #[arg(long, default_value = "latest", value_parser = parse_release_policy)]
        release_policy: ReleasePolicy,
        /// Validation protocol
        #[arg(long, value_enum)]
        mode: EvalMode,
        /// Fold count for kfold mode
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Run count for stability mode
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Training fraction for holdout and stability modes
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        /// Output directory for report CSVs
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the model against persistence and a two-layer network
    Compare {
        /// Input farm CSV
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        flags: TrainingFlags,
        #[arg(long, default_value = "latest", value_parser = parse_release_policy)]
        release_policy: ReleasePolicy,
        /// Training fraction for the chronological split
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        /// Hidden sizes of the two-layer comparison network
        #[arg(long, default_value_t = 20)]
        nn_hidden1: usize,
        #[arg(long, default_value_t = 10)]
        nn_hidden2: usize,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize { length, seed, out } => cmd_synthesize(length, seed, &out),
        Command::Train {
            data,
            flags,
            release_policy,
            out,
        } => cmd_train(&data, &flags, release_policy, &out),
        Command::Predict {
            model,
            data,
            release_policy,
            out,
        } => cmd_predict(&model, &data, release_policy, out.as_deref()),
        Command::Evaluate {
            data,
            flags,
            release_policy,
            mode,
            k,
            runs,
            train_fraction,
            out,
        } => cmd_evaluate(
            &data,
            &flags,
            release_policy,
            mode,
            k,
            runs,
            train_fraction,
            &out,
        ),
        Command::Compare {
            data,
            flags,
            release_policy,
            train_fraction,
            nn_hidden1,
            nn_hidden2,
            out,
        } => cmd_compare(
            &data,
            &flags,
            release_policy,
            train_fraction,
            (nn_hidden1, nn_hidden2),
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DBNWP_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
