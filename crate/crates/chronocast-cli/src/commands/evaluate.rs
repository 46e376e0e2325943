use std::path::Path;

use chronocast::ensemble::EnsembleModel;
use chronocast::eval::{horizon_report, ComparisonReport, HorizonReport, Units};
use chronocast::pipeline::test_windows;
use chronocast::Result;
use serde::Serialize;

use crate::artifacts::{write_json, write_text};
use crate::chart::{line_chart, Series};
use crate::commands::{bundle_path, print_report};
use crate::config::RunConfig;

#[derive(Serialize)]
struct Evaluation {
    test_windows: usize,
    units: String,
    models: Vec<HorizonReport>,
}

/// Scores the bundle's two base models and the meta-combined ensemble on the
/// held-out tail of the input series. Emits `evaluation.csv`,
/// `evaluation.json`, one per-day CSV per model, and `chart.svg`.
pub fn run(cfg: &RunConfig, bundle: Option<&Path>) -> Result<()> {
    let model = EnsembleModel::load(&bundle_path(cfg, bundle))?;
    let series = cfg.load_series_reporting()?;
    let test = test_windows(
        &series,
        cfg.split_fraction,
        &model.norm,
        &model.encoding,
        model.input_len,
        model.horizon,
    )?;

    let mut reports = vec![
        horizon_report("lstm", |w| model.lstm.predict(w), &test, Units::Normalized)?,
        horizon_report("cnn", |w| model.cnn.predict(w), &test, Units::Normalized)?,
        horizon_report(
            "meta_combination",
            |w| model.predict_normalized(w),
            &test,
            Units::Normalized,
        )?,
    ];
    if cfg.units == Units::Mw {
        reports = reports
            .iter()
            .map(|r| r.to_mw(&model.norm))
            .collect::<Result<Vec<_>>>()?;
    }

    for report in &reports {
        write_text(
            &cfg.out_dir,
            &format!("{}_per_day.csv", report.model_name),
            &report.to_csv(),
        )?;
    }
    let comparison = ComparisonReport::new(reports.clone())?;
    write_text(&cfg.out_dir, "evaluation.csv", &comparison.to_csv())?;
    write_json(
        &cfg.out_dir,
        "evaluation.json",
        &Evaluation {
            test_windows: test.n_windows(),
            units: cfg.units.to_string(),
            models: reports.clone(),
        },
    )?;

    let mut curves: Vec<(String, Vec<f64>)> = Vec::with_capacity(reports.len() * 2);
    for r in &reports {
        curves.push((
            format!("{} mae", r.model_name),
            r.per_day.iter().map(|m| m.mae).collect(),
        ));
    }
    for r in &reports {
        curves.push((
            format!("{} rmse", r.model_name),
            r.per_day.iter().map(|m| m.rmse).collect(),
        ));
    }
    let chart_series: Vec<Series> = curves
        .iter()
        .map(|(label, values)| Series {
            label,
            values,
        })
        .collect();
    let svg = line_chart(
        &format!("Per-day forecast error ({})", cfg.units),
        "horizon day",
        &format!("error ({})", cfg.units),
        &chart_series,
    );
    write_text(&cfg.out_dir, "chart.svg", &svg)?;

    println!(
        "evaluate: {} test windows, artifacts in {}",
        test.n_windows(),
        cfg.out_dir.display()
    );
    for report in &reports {
        print_report(report);
    }
    Ok(())
}
