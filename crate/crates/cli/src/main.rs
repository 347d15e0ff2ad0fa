use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod failure;

use failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "chaosnet",
    version,
    about = "Neural chaotic oscillator toolkit: data, training, design exploration and C++ generation"
)]
struct Cli {
    /// Project configuration (JSON). Defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training RNG seed, overriding `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `paths.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite generated code that already exists.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the system and write the paired dataset.
    Dataset,
    /// Train the network on the dataset and write the model file.
    Train,
    /// Enumerate candidate designs and their cost/latency estimates.
    Explore,
    /// Emit the C++ core, testbench and manifest for one design.
    Codegen,
    /// Run the oscillator; write the sequence CSV and packed bit file.
    Run,
    /// Run the randomness tests on a packed bit file.
    Randtest {
        /// Bit file to test (defaults to `paths.bits`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Number of valid bits; defaults to the whole file.
        #[arg(long)]
        bit_count: Option<usize>,
    },
    /// Fit a coefficient table from a measurement CSV.
    Fit {
        /// CSV with header `I,H,P,mode,latency_cycles,luts`.
        measurements: PathBuf,
        /// Where to write the table (defaults to `<out>/coefficients.json`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let overrides = commands::Overrides {
        seed: cli.seed,
        out: cli.out,
        force: cli.force,
        jobs: cli.jobs,
    };
    let ctx = commands::Context::load(cli.config.as_deref(), overrides)?;
    match cli.command {
        Command::Dataset => commands::dataset(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Explore => commands::explore(&ctx),
        Command::Codegen => commands::codegen(&ctx),
        Command::Run => commands::run(&ctx),
        Command::Randtest { input, bit_count } => commands::randtest(&ctx, input, bit_count),
        Command::Fit {
            measurements,
            output,
        } => commands::fit(&ctx, &measurements, output),
        Command::Config => {
            println!("{}", ctx.config.to_json());
            Ok(())
        }
    }
}
