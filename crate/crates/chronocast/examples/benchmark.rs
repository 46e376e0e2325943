//! Timing and accuracy snapshot of the full training pipeline on the
//! seed-42 synthetic benchmark. Run with:
//!
//! ```text
//! cargo run --release -p chronocast --example benchmark [days] [base_epochs] [grid] [noise_std]
//! ```
//!
//! `grid` is `small` (default) or `full`.

use std::time::Instant;

use chronocast::ensemble::{full_grid, small_grid};
use chronocast::eval::Units;
use chronocast::pipeline::{evaluate_models, train_pipeline, PipelineConfig};
use chronocast::synth::{generate, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let days: usize = args.get(1).map_or(365, |v| v.parse().expect("days"));
    let base_epochs: usize = args.get(2).map_or(80, |v| v.parse().expect("epochs"));
    let grid = match args.get(3).map(String::as_str) {
        Some("full") => full_grid(),
        _ => small_grid(),
    };
    let noise_std: f64 = args.get(4).map_or(1500.0, |v| v.parse().expect("noise"));

    let series = generate(&SynthConfig {
        days,
        noise_std,
        ..SynthConfig::default()
    })
    .expect("synthetic series");
    let cfg = PipelineConfig {
        base_epochs,
        grid,
        ..PipelineConfig::standard(42)
    };

    let t0 = Instant::now();
    let tp = train_pipeline(&series, &cfg).expect("training");
    let train_elapsed = t0.elapsed();

    let reports = evaluate_models(&tp, Units::Normalized).expect("evaluation");
    println!(
        "days={days} base_epochs={base_epochs} grid={} | train {:.1}s",
        cfg.grid.len(),
        train_elapsed.as_secs_f64()
    );
    println!(
        "windows: base {} meta {} val {} test {}",
        tp.datasets.base_train.n_windows(),
        tp.datasets.meta_fit.n_windows(),
        tp.datasets.grid_val.n_windows(),
        tp.datasets.test.n_windows()
    );
    println!(
        "final train losses: lstm {:.6} (from {:.6}) cnn {:.6} (from {:.6})",
        tp.lstm_history.last().unwrap(),
        tp.lstm_history.first().unwrap(),
        tp.cnn_history.last().unwrap(),
        tp.cnn_history.first().unwrap()
    );
    for r in &reports {
        println!(
            "{:>4}: avg mae {:.5} rmse {:.5} | day1 mae {:.5}",
            r.model_name, r.avg.mae, r.avg.rmse, r.per_day[0].mae
        );
    }
    let min_base = reports[0].avg.mae.min(reports[1].avg.mae);
    println!(
        "mc/min(base) MAE ratio: {:.4}",
        reports[2].avg.mae / min_base
    );
    for meta in &tp.model.metas {
        println!(
            "day {}: {} val {:.6}",
            meta.day_index, meta.chosen, meta.validation_score
        );
    }
}
