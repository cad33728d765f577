//! `bargebench`: barge-in dataset synthesis, NLMS echo cancellation,
//! keyword-spotter training, metric evaluation, and report plotting.
//!
//! Exit codes are stable for scripting: 0 ok, 2 configuration error, 3 I/O
//! error, 4 numeric failure (non-finite values). Verbosity is controlled by
//! the `BARGEBENCH_LOG` environment variable (`error`..`trace`). stdout
//! carries machine-readable `key=value` lines; the resolved configuration is
//! echoed to stderr and written next to the outputs as `resolved.toml`.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bargebench", version, about, propagate_version = true)]
struct Cli {
    /// TOML config file; tables [dataset], [model], [train], [aec], [eval],
    /// [report]. Relative paths inside resolve against the file's directory.
    #[arg(long, global = true, value_name = "TOML")]
    config: Option<PathBuf>,

    /// Overrides the seed of the config table the subcommand uses.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, created if missing. All outputs land here.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for dataset synthesis (0 = all cores). Training and
    /// evaluation run single-threaded for reproducibility.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a barge-in dataset from the [dataset] table.
    Simulate,
    /// Cancel playback echo from a capture with an NLMS filter.
    Aec {
        /// Microphone capture WAV.
        #[arg(long)]
        mic: Option<PathBuf>,
        /// Dry playback reference WAV.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Adaptive filter length in taps.
        #[arg(long)]
        taps: Option<usize>,
        /// NLMS step size mu in (0, 2].
        #[arg(long)]
        step: Option<f64>,
        /// Norm regularizer.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Train the keyword spotter per the [model] and [train] tables.
    Train,
    /// Score a checkpoint against a manifest; write JSON/CSV/SVG reports.
    Eval {
        /// Checkpoint JSON produced by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset manifest to score.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Merge eval reports into a side-by-side comparison table and chart.
    Report {
        /// Eval report JSON files (2+ for a comparison, 1 passes through).
        inputs: Vec<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("BARGEBENCH_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let ctx = commands::Ctx {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
    };
    let result = match cli.cmd {
        Cmd::Simulate => commands::simulate(&ctx),
        Cmd::Aec {
            mic,
            reference,
            taps,
            step,
            eps,
        } => commands::aec(
            &ctx,
            &commands::AecArgs {
                mic,
                reference,
                taps,
                step,
                eps,
            },
        ),
        Cmd::Train => commands::train_cmd(&ctx),
        Cmd::Eval {
            checkpoint,
            manifest,
        } => commands::eval_cmd(
            &ctx,
            &commands::EvalArgs {
                checkpoint,
                manifest,
            },
        ),
        Cmd::Report { inputs } => commands::report_cmd(&ctx, &inputs),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        let code = if e.is_numeric() {
            4
        } else if e.is_io() {
            3
        } else {
            2
        };
        std::process::exit(code);
    }
}
