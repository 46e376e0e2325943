use std::time::Instant;

use chronocast::ensemble::{GridScores, MetaCandidate};
use chronocast::pipeline::train_pipeline;
use chronocast::Result;
use serde::Serialize;

use crate::artifacts::{artifact_path, write_json};
use crate::config::RunConfig;

#[derive(Serialize)]
struct MetaLog {
    day: usize,
    chosen: MetaCandidate,
    validation_score: f64,
}

/// Everything about a training run that is a pure function of the inputs.
/// Wall-clock timings live in a separate artifact so that repeated runs with
/// the same seed produce byte-identical logs.
#[derive(Serialize)]
struct TrainLog {
    seed: u64,
    encoding: String,
    input_len: usize,
    horizon: usize,
    split_fraction: f64,
    base_epochs: usize,
    grid_size: usize,
    series_len: usize,
    train_len: usize,
    base_len: usize,
    base_windows: usize,
    meta_windows: usize,
    grid_val_windows: usize,
    test_windows: usize,
    lstm_history: Vec<f64>,
    cnn_history: Vec<f64>,
    metas: Vec<MetaLog>,
    grid_scores: Vec<GridScores>,
}

#[derive(Serialize)]
struct Timings {
    train_seconds: f64,
}

/// Trains the full stack (two base networks, seven meta-regressors) and
/// writes `bundle.json`, `train_log.json`, and `timings.json`.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let series = cfg.load_series_reporting()?;
    let pcfg = cfg.pipeline_config()?;

    let started = Instant::now();
    let mut trained = train_pipeline(&series, &pcfg)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let bundle = artifact_path(&cfg.out_dir, "bundle.json")?;
    trained.model.save(&bundle)?;

    let metas: Vec<MetaLog> = trained
        .model
        .metas
        .iter()
        .map(|m| MetaLog {
            day: m.day_index,
            chosen: m.chosen,
            validation_score: m.validation_score,
        })
        .collect();
    let log = TrainLog {
        seed: pcfg.seed,
        encoding: pcfg.encoding.name.clone(),
        input_len: pcfg.input_len,
        horizon: pcfg.horizon,
        split_fraction: pcfg.split_fraction,
        base_epochs: pcfg.base_epochs,
        grid_size: pcfg.grid.len(),
        series_len: series.len(),
        train_len: trained.datasets.train_len,
        base_len: trained.datasets.base_len,
        base_windows: trained.datasets.base_train.n_windows(),
        meta_windows: trained.datasets.meta_fit.n_windows(),
        grid_val_windows: trained.datasets.grid_val.n_windows(),
        test_windows: trained.datasets.test.n_windows(),
        lstm_history: trained.lstm_history.clone(),
        cnn_history: trained.cnn_history.clone(),
        metas,
        grid_scores: trained.grid_scores.clone(),
    };
    write_json(&cfg.out_dir, "train_log.json", &log)?;
    write_json(&cfg.out_dir, "timings.json", &Timings { train_seconds })?;

    println!(
        "train: seed {} encoding {} -> {} ({:.1}s)",
        pcfg.seed,
        pcfg.encoding.name,
        bundle.display(),
        train_seconds
    );
    for meta in &trained.model.metas {
        println!(
            "  day {}: {} (val mse {:.6e})",
            meta.day_index, meta.chosen, meta.validation_score
        );
    }
    Ok(())
}
