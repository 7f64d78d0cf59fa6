use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nltop_cli::commands;
use nltop_cli::CliResult;

#[derive(Parser)]
#[command(
    name = "nltop",
    about = "Structured prediction with a nonlinear potential transformation: \
             data generation, training, evaluation, and benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate dataset files for the configured task.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Train the configured model through its stages.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate a checkpoint on a dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// exact-dp | message-passing | saddle | spen-relaxed
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional config supplying saddle/relaxed-inference settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Decode the first example of a dataset file and dump the trace.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare analytic gradients against finite differences, per block.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Train and evaluate the baseline ladder on the configured task.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData { config, out, seed_override } => {
            commands::cmd_gen_data(&config, out.as_deref(), seed_override)
        }
        Command::Train { config, out, seed_override, threads } => {
            set_threads(threads);
            commands::cmd_train(&config, out.as_deref(), seed_override)
        }
        Command::Eval { checkpoint, dataset, mode, out, config, threads } => {
            set_threads(threads);
            commands::cmd_eval(&checkpoint, &dataset, &mode, out.as_deref(), config.as_deref())
        }
        Command::Infer { checkpoint, dataset, out, config } => {
            commands::cmd_infer(&checkpoint, &dataset, out.as_deref(), config.as_deref())
        }
        Command::Gradcheck { config, seed_override } => {
            commands::cmd_gradcheck(&config, seed_override)
        }
        Command::Bench { config, out, seed_override, threads } => {
            set_threads(threads);
            commands::cmd_bench(&config, out.as_deref(), seed_override)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
