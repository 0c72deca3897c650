//! `aisbench`: run the AIS LLM benchmark stages from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use aisbench::config::{Overrides, RunConfig, TransportMode};
use aisbench::error::BenchError;
use aisbench::pipeline;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aisbench", version, about = "Benchmark LLM question answering over AIS vessel traffic")]
struct Cli {
    /// Run configuration.
    #[arg(long, global = true, default_value = "fixtures/config.toml")]
    config: PathBuf,
    /// Dataset sizes, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Methods (zsa1, zsa2, zsa3, nlidb), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// live, replay or scripted.
    #[arg(long, global = true)]
    transport: Option<TransportMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic raw AIS, emissions and fleet files.
    Synth,
    /// Parse, clean and resample the raw inputs.
    Ingest,
    /// Label the cluster and ferry queries from the fleet manifest.
    LabelExperts,
    /// Pick probes and subsets and compute the ground truth.
    GroundTruth,
    /// Ask every method every probe question.
    Run {
        /// Report prompt sizes and request counts without calling a model.
        #[arg(long)]
        dry_run: bool,
    },
    /// Match answers against the ground truth.
    Score,
    /// Write the report tables.
    Report,
    /// ingest, ground-truth, run, score and report.
    All,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        sizes: cli.sizes,
        methods: cli.methods,
        transport: cli.transport,
        seed: cli.seed,
        out_dir: cli.out,
    };
    let result = RunConfig::load(&cli.config, &overrides).and_then(|cfg| match cli.command {
        Command::Synth => pipeline::cmd_synth(&cfg),
        Command::Ingest => pipeline::cmd_ingest(&cfg),
        Command::LabelExperts => pipeline::cmd_label_experts(&cfg),
        Command::GroundTruth => pipeline::cmd_ground_truth(&cfg),
        Command::Run { dry_run } => pipeline::cmd_run(&cfg, dry_run),
        Command::Score => pipeline::cmd_score(&cfg),
        Command::Report => pipeline::cmd_report(&cfg),
        Command::All => pipeline::cmd_all(&cfg),
    });
    match result {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(&e)
        }
    }
}

fn exit(e: &BenchError) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}
