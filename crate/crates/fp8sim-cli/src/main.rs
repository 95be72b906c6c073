//! `fp8sim`: command-line front end for the FP8 mixed-precision training
//! simulator. Every subcommand writes a CSV artifact whose `#`-commented
//! header echoes the full resolved configuration and doubles as a config
//! file, so any artifact reproduces itself via `--config`.

mod ablate;
mod artifact;
mod bench;
mod codec_table;
mod config;
mod error;
mod plan;
mod report;
mod train_cmd;

use clap::{Parser, Subcommand};

/// Software-emulated FP8 mixed-precision training experiments.
#[derive(Parser)]
#[command(name = "fp8sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the full 256-code table of an FP8 format.
    CodecTable(codec_table::CodecTableArgs),
    /// Benchmark one gradient all-reduce strategy on synthetic ensembles.
    AllreduceBench(bench::BenchArgs),
    /// Train the desk-scale model once per optimizer storage spec.
    AblateOptimizer(ablate::AblateArgs),
    /// Distribute tensors across devices, largest first.
    ZeroPlan(plan::PlanArgs),
    /// Train the desk-scale model under a mixed-precision policy.
    Train(train_cmd::TrainArgs),
    /// Summarize previously written artifacts.
    Report(report::ReportArgs),
}

fn main() {
    // clap itself exits 2 on invalid flags, with a usage message
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CodecTable(args) => codec_table::run(args),
        Command::AllreduceBench(args) => bench::run(args),
        Command::AblateOptimizer(args) => ablate::run(args),
        Command::ZeroPlan(args) => plan::run(args),
        Command::Train(args) => train_cmd::run(args),
        Command::Report(args) => report::run(args),
    };
    if let Err(err) = result {
        eprintln!("fp8sim: {err}");
        std::process::exit(err.exit_code());
    }
}
