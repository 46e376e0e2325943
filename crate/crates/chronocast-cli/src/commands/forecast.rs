use std::path::Path;

use chrono::{Duration, NaiveDate};
use chronocast::ensemble::EnsembleModel;
use chronocast::features::build_feature_frame;
use chronocast::series::normalize;
use chronocast::{Error, Result};
use serde::Serialize;

use crate::artifacts::{write_json, write_text};
use crate::commands::bundle_path;
use crate::config::RunConfig;

#[derive(Serialize)]
struct ForecastRow {
    date: String,
    normalized: f64,
    mw: f64,
}

#[derive(Serialize)]
struct Forecast {
    anchor_date: String,
    horizon: usize,
    rows: Vec<ForecastRow>,
}

/// Predicts the seven days after `--date` (default: the last date in the
/// input CSV) from a trained bundle. Emits `forecast.csv` and
/// `forecast.json`.
pub fn run(cfg: &RunConfig, bundle: Option<&Path>, date: Option<NaiveDate>) -> Result<()> {
    let model = EnsembleModel::load(&bundle_path(cfg, bundle))?;
    let series = cfg.load_series_reporting()?;
    let anchor = match date {
        Some(d) => d,
        None => *series.dates().last().expect("load_csv rejects empty series"),
    };
    let idx = series
        .dates()
        .iter()
        .position(|d| *d == anchor)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "date {anchor} not present in the input series ({} .. {})",
                series.dates().first().unwrap(),
                series.dates().last().unwrap()
            ))
        })?;
    if idx + 1 < model.input_len {
        return Err(Error::InsufficientData(format!(
            "forecast from {anchor} needs {} days of history, only {} available",
            model.input_len,
            idx + 1
        )));
    }

    let normalized = normalize(&series, &model.norm)?;
    let frame = build_feature_frame(&normalized, &model.encoding)?;
    let n_features = frame.feature_count();
    let mut window = vec![0.0; model.input_len * n_features];
    for (w, row) in (idx + 1 - model.input_len..idx + 1).enumerate() {
        frame.fill_row(row, &mut window[w * n_features..(w + 1) * n_features]);
    }

    let preds = model.predict_normalized(&window)?;
    let rows: Vec<ForecastRow> = preds
        .iter()
        .enumerate()
        .map(|(day, &value)| ForecastRow {
            date: (anchor + Duration::days(day as i64 + 1)).to_string(),
            normalized: value,
            mw: model.norm.invert(value),
        })
        .collect();

    let mut csv = String::from("date,normalized,mw\n");
    for row in &rows {
        csv.push_str(&format!("{},{:.6},{:.3}\n", row.date, row.normalized, row.mw));
    }
    write_text(&cfg.out_dir, "forecast.csv", &csv)?;
    write_json(
        &cfg.out_dir,
        "forecast.json",
        &Forecast {
            anchor_date: anchor.to_string(),
            horizon: model.horizon,
            rows,
        },
    )?;

    println!("forecast: 7 days from {anchor}");
    print!("{csv}");
    Ok(())
}
