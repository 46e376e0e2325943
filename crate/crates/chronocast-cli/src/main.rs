//! Command-line front door for the chronocast forecasting engine.

mod artifacts;
mod chart;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use chronocast::{Error, Result};

use config::{GridChoice, RunConfig};

#[derive(Parser)]
#[command(
    name = "chronocast",
    version,
    about = "Multistep daily electricity-consumption forecasting",
    long_about = "Generates synthetic daily load series, analyzes calendar-feature \
                  correlations, trains a stacked LSTM/CNN ensemble with per-day MLP \
                  meta regressors, and evaluates 7-day forecasts."
)]
struct Cli {
    /// Master seed; every random stream of a run derives from it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Flat key = value configuration file; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory receiving all artifacts (created if absent).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Report unit: normalized [0, 1] scale or megawatts.
    #[arg(long, global = true, value_enum)]
    units: Option<UnitsArg>,
    /// Linearly interpolate missing dates instead of rejecting the CSV.
    #[arg(long, global = true)]
    fill_gaps: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Normalized,
    Mw,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    /// All 400 hyperparameter combinations.
    Full,
    /// 8-candidate corner subset for quick runs.
    Small,
}

#[derive(Parser)]
struct PipelineArgs {
    /// Daily `date,consumption` CSV to train on.
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
    /// Encoding name (full, no_cyclical, no_calendar, raw_indices) or a
    /// JSON encoding-config path.
    #[arg(long)]
    encoding: Option<String>,
    /// Meta-regressor search grid.
    #[arg(long, value_enum)]
    grid: Option<GridArg>,
    /// Epochs for both base models (standard recipe: 80).
    #[arg(long, value_name = "N")]
    base_epochs: Option<usize>,
    /// Chronological train share of the series.
    #[arg(long, value_name = "F")]
    split_fraction: Option<f64>,
    /// Sliding-window input length in days.
    #[arg(long, value_name = "N")]
    input_len: Option<usize>,
    /// Forecast horizon in days (the fixed architectures serve 7).
    #[arg(long, value_name = "N")]
    horizon: Option<usize>,
    /// Retrain the bases on the whole train slice after meta fitting.
    #[arg(long)]
    refit_bases: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic daily consumption CSV.
    Synth {
        /// Series length in days (at least 128).
        #[arg(long, value_name = "N")]
        days: Option<usize>,
        /// Standard deviation of the additive noise, in MW.
        #[arg(long, value_name = "MW")]
        noise: Option<f64>,
        /// First date of the series.
        #[arg(long, value_name = "YYYY-MM-DD")]
        start: Option<NaiveDate>,
        /// Output CSV path (default <out-dir>/synthetic.csv).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Correlation table and group summaries for a daily series.
    Analyze {
        /// Daily `date,consumption` CSV to analyze.
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
    },
    /// Train the full ensemble and write a checkpoint bundle.
    Train {
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Forecast the 7 days following --date from a trained bundle.
    Forecast {
        /// Checkpoint bundle written by `train`.
        #[arg(long, value_name = "FILE")]
        bundle: Option<PathBuf>,
        /// Daily CSV supplying at least the input-window history.
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
        /// Last observed date; the forecast covers the 7 days after it.
        #[arg(long, value_name = "YYYY-MM-DD")]
        date: Option<NaiveDate>,
    },
    /// Score a trained bundle on the held-out test windows.
    Evaluate {
        /// Checkpoint bundle written by `train`.
        #[arg(long, value_name = "FILE")]
        bundle: Option<PathBuf>,
        /// Daily CSV the bundle was trained on.
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
        /// Chronological train share used at training time.
        #[arg(long, value_name = "F")]
        split_fraction: Option<f64>,
    },
    /// Train and score all four feature-encoding ablation variants.
    Ablate {
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

/// Honors `CHRONOCAST_THREADS` before any parallel work starts.
fn init_thread_pool() -> Result<()> {
    match std::env::var("CHRONOCAST_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let threads: usize = raw.parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "CHRONOCAST_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if threads == 0 {
                return Err(Error::InvalidConfig(
                    "CHRONOCAST_THREADS must be a positive integer, got 0".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| Error::InvalidConfig(format!("thread pool setup failed: {e}")))
        }
    }
}

fn apply_pipeline_args(cfg: &mut RunConfig, args: &PipelineArgs) {
    if let Some(v) = &args.input {
        cfg.input_csv = Some(v.clone());
    }
    if let Some(v) = &args.encoding {
        cfg.encoding = v.clone();
    }
    if let Some(v) = args.grid {
        cfg.grid = match v {
            GridArg::Full => GridChoice::Full,
            GridArg::Small => GridChoice::Small,
        };
    }
    if let Some(v) = args.base_epochs {
        cfg.base_epochs = v;
    }
    if let Some(v) = args.split_fraction {
        cfg.split_fraction = v;
    }
    if let Some(v) = args.input_len {
        cfg.input_len = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    if args.refit_bases {
        cfg.refit_bases = true;
    }
}

fn run(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(units) = cli.units {
        cfg.units = match units {
            UnitsArg::Normalized => chronocast::eval::Units::Normalized,
            UnitsArg::Mw => chronocast::eval::Units::Mw,
        };
    }
    if cli.fill_gaps {
        cfg.fill_gaps = true;
    }

    match &cli.command {
        Command::Synth {
            days,
            noise,
            start,
            output,
        } => {
            if let Some(d) = days {
                cfg.synth_days = *d;
            }
            if let Some(n) = noise {
                cfg.synth_noise = *n;
            }
            if let Some(s) = start {
                cfg.synth_start = *s;
            }
            commands::synth::run(&cfg, output.as_deref())
        }
        Command::Analyze { input } => {
            if let Some(v) = input {
                cfg.input_csv = Some(v.clone());
            }
            commands::analyze::run(&cfg)
        }
        Command::Train { pipeline } => {
            apply_pipeline_args(&mut cfg, pipeline);
            commands::train::run(&cfg)
        }
        Command::Forecast {
            bundle,
            input,
            date,
        } => {
            if let Some(v) = input {
                cfg.input_csv = Some(v.clone());
            }
            commands::forecast::run(&cfg, bundle.as_deref(), *date)
        }
        Command::Evaluate {
            bundle,
            input,
            split_fraction,
        } => {
            if let Some(v) = input {
                cfg.input_csv = Some(v.clone());
            }
            if let Some(f) = split_fraction {
                cfg.split_fraction = *f;
            }
            commands::evaluate::run(&cfg, bundle.as_deref())
        }
        Command::Ablate { pipeline } => {
            apply_pipeline_args(&mut cfg, pipeline);
            commands::ablate::run(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
