//! `erythro`: feature extraction, cross-validation grids, training,
//! prediction and timing runs for erythrocyte classification.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunArgs;
use failure::{Failure, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "erythro", version, about = "Sickle-cell classification from fixed CNN features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract and cache feature matrices for each (backbone, variant)
    Extract {
        #[command(flatten)]
        run: RunArgs,
        /// Also write a CSV copy next to each cache file
        #[arg(long)]
        csv: bool,
    },
    /// Run the cross-validation grid and write results.{json,csv,md}
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train one classifier on the full dataset and save it
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Feature file (.efm or .csv) to train on instead of a dataset
        #[arg(long)]
        input: Option<PathBuf>,
        /// Also write a JSON dump of the model
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print `image_id,predicted_class,score_0,score_1,score_2` per sample
    Predict {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
        /// Feature file (.efm or .csv); defaults to features of --dataset
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Time full-data training and prediction
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
        /// Use a random ROWSxDIM matrix instead of a dataset, e.g. 626x33792
        #[arg(long, value_parser = parse_shape)]
        synthetic: Option<(usize, usize)>,
    },
    /// Write a procedurally drawn corpus with a manifest
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (rows, dim) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxDIM, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size `{v}`: {e}"));
    let shape = (parse(rows)?, parse(dim)?);
    if shape.0 == 0 || shape.1 == 0 {
        return Err("sizes must be positive".into());
    }
    Ok(shape)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Extract { run, csv } => commands::extract(&run, csv),
        Command::Evaluate { run } => commands::evaluate(&run),
        Command::Train { run, input, json } => commands::train(&run, input.as_deref(), json.as_deref()),
        Command::Predict { run, model, input } => commands::predict(&run, &model, input.as_deref()),
        Command::Benchmark { run, synthetic } => commands::benchmark(&run, synthetic),
        Command::Synth { out, per_class, seed } => commands::synth(&out, per_class, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("erythro: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
