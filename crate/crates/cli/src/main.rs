//! Experiment runner: binds streams, models, and prequential evaluation
//! into reproducible seeded runs.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod experiment;

#[derive(Parser)]
#[command(name = "streamforest", version, about = "Streaming decision-tree experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one model over one stream across seeds.
    Run(RunArgs),
    /// Evaluate the ensemble-confidence formula (value, minimal m, or grid).
    Confidence(ConfidenceArgs),
    /// Cartesian sweep over d and k, one run per cell.
    Sweep(SweepArgs),
}

/// Flags mirror the key=value config-file keys; a flag always overrides
/// the file. Defaults are the library defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// key=value config file supplying any of the other flags
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// CSV dataset path (exactly one of --csv/--arff/--generator)
    #[arg(long)]
    csv: Option<String>,
    /// ARFF dataset path
    #[arg(long)]
    arff: Option<String>,
    /// Synthetic generator: waveform | sensors
    #[arg(long)]
    generator: Option<String>,
    /// Instances to generate (generators only) [default: 5000]
    #[arg(long)]
    count: Option<usize>,
    /// CSV task: classification | regression [default: regression]
    #[arg(long)]
    task: Option<String>,
    /// CSV columns to treat as nominal (comma-separated)
    #[arg(long)]
    nominal: Option<String>,
    /// Target column name [default: last column]
    #[arg(long)]
    target: Option<String>,

    /// Model: single | rf | hybrid [default: hybrid]
    #[arg(long)]
    model: Option<String>,
    /// Weak learner count [default: 10]
    #[arg(long)]
    m: Option<usize>,
    /// Impact threshold d in [0,1] [default: 0.2]
    #[arg(long)]
    d: Option<f64>,
    /// Controller window size k [default: 15]
    #[arg(long)]
    k: Option<usize>,
    /// Hoeffding delta [default: 1e-7]
    #[arg(long)]
    delta: Option<f64>,
    /// Grace period between split attempts [default: 50]
    #[arg(long)]
    grace: Option<usize>,
    /// Tie threshold tau [default: 0.7]
    #[arg(long)]
    tie: Option<f64>,
    /// Regression correctness tolerance [default: 0.1]
    #[arg(long)]
    tol: Option<f64>,
    /// Drift detector threshold in (0,1] [default: 0.5]
    #[arg(long)]
    drift_threshold: Option<f64>,

    /// Inject drift: abrupt:IDX or gradual:START:END
    #[arg(long)]
    drift: Option<String>,
    /// Classes to swap at the drift point, as A:B [default: 0:1]
    #[arg(long)]
    drift_swap: Option<String>,

    /// Number of seeded repeats (seeds 0..N) [default: 1]
    #[arg(long)]
    seeds: Option<usize>,
    /// Reuse the seed-0 stream for every repeat (vary only the model seed)
    #[arg(long)]
    fixed_stream: bool,
    /// Output directory [default: ./out]
    #[arg(long)]
    out: Option<String>,
    /// Rolling accuracy window [default: 200]
    #[arg(long)]
    wmetric: Option<usize>,
    /// Convergence threshold [default: 0.9]
    #[arg(long)]
    threshold: Option<f64>,
    /// Trace CSV down-sampling stride [default: 1]
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ConfidenceArgs {
    /// Features per weak learner (n in Eq. terms)
    #[arg(long)]
    n: Option<usize>,
    /// Weak learner count to evaluate
    #[arg(long)]
    m: Option<usize>,
    /// Print the minimal m reaching this confidence instead
    #[arg(long)]
    target: Option<f64>,
    /// Emit a CSV grid: n in {step, 2*step, ..., n-max}, m in 1..=m-max
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 10)]
    n_step: usize,
    #[arg(long, default_value_t = 100)]
    m_max: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated d values
    #[arg(long)]
    d_values: String,
    /// Comma-separated k values
    #[arg(long)]
    k_values: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => experiment::cmd_run(&args),
        Command::Confidence(args) => experiment::cmd_confidence(&args),
        Command::Sweep(args) => experiment::cmd_sweep(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
