use chronocast::correlation::{correlation_report, group_summary, CorrelationReport, GroupSummary};
use chronocast::features::CalendarFeature;
use chronocast::series::{fit_minmax, normalize};
use chronocast::Result;
use serde::Serialize;

use crate::artifacts::{write_json, write_text};
use crate::config::RunConfig;

#[derive(Serialize)]
struct Analysis {
    rows: usize,
    first_date: String,
    last_date: String,
    correlation: CorrelationReport,
    groups: Vec<GroupSummary>,
}

/// Correlation study of calendar features against consumption, plus grouped
/// distribution summaries. Emits `correlation.csv` and `analysis.json`.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let series = cfg.load_series_reporting()?;
    let norm = fit_minmax(&series)?;
    let normalized = normalize(&series, &norm)?;
    let correlation = correlation_report(&normalized)?;

    let group_features = [
        CalendarFeature::DayInWeek,
        CalendarFeature::MonthInYear,
        CalendarFeature::WeekInYear,
        CalendarFeature::BusinessDay,
    ];
    let groups = group_features
        .iter()
        .map(|&f| group_summary(&series, f))
        .collect::<Result<Vec<_>>>()?;

    write_text(&cfg.out_dir, "correlation.csv", &correlation.to_csv())?;
    let analysis = Analysis {
        rows: series.len(),
        first_date: series.dates().first().unwrap().to_string(),
        last_date: series.dates().last().unwrap().to_string(),
        correlation: correlation.clone(),
        groups,
    };
    write_json(&cfg.out_dir, "analysis.json", &analysis)?;

    println!("analyze: {} rows, artifacts in {}", series.len(), cfg.out_dir.display());
    println!("feature        r_raw      r_sin      r_cos      selected");
    for row in &correlation.rows {
        println!(
            "{:<14} {:>9.6}  {:>9.6}  {:>9.6}  {}",
            row.feature.name(),
            row.r_raw,
            row.r_sin,
            row.r_cos,
            row.selected
        );
    }
    Ok(())
}
