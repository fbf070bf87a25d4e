use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aekmc::pipeline::{self, PipelineConfig};

#[derive(Parser)]
#[command(name = "aekmc", version, about = "Cluster two-vehicle driving encounters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines under `[section]` headers.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set clustering.k=8`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Top-level seed; every stage seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled trip log.
    Generate(Common),
    /// Detect encounters in the trip log and compute feature vectors.
    Extract(Common),
    /// Fit normalization and train the autoencoder.
    Train(Common),
    /// Encode features into latent codes.
    Encode(Common),
    /// Run k-means on latent codes or raw features.
    Cluster(Common),
    /// Compare the clustering against raw k-means.
    Evaluate(Common),
    /// Write SVG figures of encounters, clusters and the loss curve.
    Plot(Common),
    /// Print the effective configuration.
    Config(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, stage): (&Common, fn(&PipelineConfig) -> aekmc::Result<String>) = match &cli.command {
        Command::Generate(c) => (c, pipeline::generate),
        Command::Extract(c) => (c, pipeline::extract),
        Command::Train(c) => (c, pipeline::train),
        Command::Encode(c) => (c, pipeline::encode),
        Command::Cluster(c) => (c, pipeline::cluster),
        Command::Evaluate(c) => (c, pipeline::evaluate),
        Command::Plot(c) => (c, pipeline::plot),
        Command::Config(c) => (c, |cfg| cfg.validate().map(|_| cfg.to_toml_string())),
    };
    let result = pipeline::load_config(common.config.as_deref(), &common.overrides, common.seed).and_then(|cfg| stage(&cfg));
    match result {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
