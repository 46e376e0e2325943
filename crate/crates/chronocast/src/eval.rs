//! Horizon error metrics (MAE/RMSE), model comparison reports, and the
//! ablation variants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EncodingConfig;
use crate::series::NormalizationParams;
use crate::window::WindowedDataset;

/// Unit of the consumption values a report is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Normalized,
    Mw,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Units::Normalized => write!(f, "normalized"),
            Units::Mw => write!(f, "MW"),
        }
    }
}

fn check_batch(preds: &[Vec<f64>], targets: &[Vec<f64>], day: usize) -> Result<()> {
    if preds.is_empty() || targets.is_empty() {
        return Err(Error::InsufficientData(
            "metrics need at least one prediction/target pair".into(),
        ));
    }
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: t.len(),
            });
        }
        if day == 0 || day > p.len() {
            return Err(Error::InvalidConfig(format!(
                "day {day} outside 1..={}",
                p.len()
            )));
        }
    }
    Ok(())
}

/// Mean absolute error for one horizon day (1-based) over all windows.
pub fn mae(preds: &[Vec<f64>], targets: &[Vec<f64>], day: usize) -> Result<f64> {
    check_batch(preds, targets, day)?;
    let sum: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p[day - 1] - t[day - 1]).abs())
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Root mean square error for one horizon day (1-based) over all windows.
pub fn rmse(preds: &[Vec<f64>], targets: &[Vec<f64>], day: usize) -> Result<f64> {
    check_batch(preds, targets, day)?;
    let sum: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let e = p[day - 1] - t[day - 1];
            e * e
        })
        .sum();
    Ok((sum / preds.len() as f64).sqrt())
}

/// MAE/RMSE pair for one horizon day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub mae: f64,
    pub rmse: f64,
}

impl DayMetrics {
    fn scaled(self, factor: f64) -> DayMetrics {
        DayMetrics {
            mae: self.mae * factor,
            rmse: self.rmse * factor,
        }
    }
}

/// Per-day MAE/RMSE across the 7-day horizon plus their horizon averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub model_name: String,
    pub per_day: Vec<DayMetrics>,
    pub avg: DayMetrics,
    pub units: Units,
}

impl HorizonReport {
    /// Computes the report from per-window horizon vectors.
    pub fn from_predictions(
        model_name: &str,
        preds: &[Vec<f64>],
        targets: &[Vec<f64>],
        units: Units,
    ) -> Result<HorizonReport> {
        check_batch(preds, targets, 1)?;
        let horizon = preds[0].len();
        let mut per_day = Vec::with_capacity(horizon);
        for day in 1..=horizon {
            per_day.push(DayMetrics {
                mae: mae(preds, targets, day)?,
                rmse: rmse(preds, targets, day)?,
            });
        }
        let avg = DayMetrics {
            mae: per_day.iter().map(|m| m.mae).sum::<f64>() / horizon as f64,
            rmse: per_day.iter().map(|m| m.rmse).sum::<f64>() / horizon as f64,
        };
        Ok(HorizonReport {
            model_name: model_name.to_string(),
            per_day,
            avg,
            units,
        })
    }

    /// Converts a normalized report to megawatts by scaling every entry by
    /// the normalization range. Both MAE and RMSE are positively homogeneous,
    /// so the scaling is exact.
    pub fn to_mw(&self, norm: &NormalizationParams) -> Result<HorizonReport> {
        if self.units != Units::Normalized {
            return Err(Error::InvalidConfig(format!(
                "cannot rescale a report already in {}",
                self.units
            )));
        }
        let factor = norm.range();
        Ok(HorizonReport {
            model_name: self.model_name.clone(),
            per_day: self.per_day.iter().map(|m| m.scaled(factor)).collect(),
            avg: self.avg.scaled(factor),
            units: Units::Mw,
        })
    }

    /// One row per day plus a trailing average row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day,mae,rmse\n");
        for (i, m) in self.per_day.iter().enumerate() {
            out.push_str(&format!("{},{:.6},{:.6}\n", i + 1, m.mae, m.rmse));
        }
        out.push_str(&format!("avg,{:.6},{:.6}\n", self.avg.mae, self.avg.rmse));
        out
    }
}

/// Runs a predictor over every window of a dataset and scores it per day.
pub fn horizon_report(
    model_name: &str,
    predict: impl Fn(&[f64]) -> Result<Vec<f64>>,
    test: &WindowedDataset,
    units: Units,
) -> Result<HorizonReport> {
    if test.n_windows() == 0 {
        return Err(Error::InsufficientData("no test windows to evaluate".into()));
    }
    let mut preds = Vec::with_capacity(test.n_windows());
    let mut targets = Vec::with_capacity(test.n_windows());
    for w in 0..test.n_windows() {
        let p = predict(test.input(w))?;
        if p.len() != test.horizon {
            return Err(Error::ShapeMismatch(format!(
                "predictor returned {} values for horizon {}",
                p.len(),
                test.horizon
            )));
        }
        preds.push(p);
        targets.push(test.target(w).to_vec());
    }
    HorizonReport::from_predictions(model_name, &preds, &targets, units)
}

/// Side-by-side table of several models over the same test windows, one
/// day-row per horizon day plus the average row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub models: Vec<HorizonReport>,
}

impl ComparisonReport {
    pub fn new(models: Vec<HorizonReport>) -> Result<ComparisonReport> {
        if models.is_empty() {
            return Err(Error::InvalidConfig("empty comparison report".into()));
        }
        let horizon = models[0].per_day.len();
        let units = models[0].units;
        for m in &models {
            if m.per_day.len() != horizon || m.units != units {
                return Err(Error::InvalidConfig(
                    "comparison mixes horizons or units".into(),
                ));
            }
        }
        Ok(ComparisonReport { models })
    }

    /// Columns are `<model>_mae,<model>_rmse` per model, rows are days 1..H
    /// then `avg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day");
        for m in &self.models {
            out.push_str(&format!(",{0}_mae,{0}_rmse", m.model_name));
        }
        out.push('\n');
        let horizon = self.models[0].per_day.len();
        for day in 0..horizon {
            out.push_str(&format!("{}", day + 1));
            for m in &self.models {
                out.push_str(&format!(
                    ",{:.6},{:.6}",
                    m.per_day[day].mae, m.per_day[day].rmse
                ));
            }
            out.push('\n');
        }
        out.push_str("avg");
        for m in &self.models {
            out.push_str(&format!(",{:.6},{:.6}", m.avg.mae, m.avg.rmse));
        }
        out.push('\n');
        out
    }
}

/// The four feature-encoding ablations. `no_calendar` keeps the cyclical
/// day-in-year/week-in-year/month-in-year/day-in-week encodings and drops the
/// business-day flag (the only non-cyclical calendar column at daily
/// resolution); `no_cyclical` replaces every trigonometric column with its
/// raw index; `raw_indices` applies both removals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoCyclical,
    NoCalendar,
    RawIndices,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Full,
        AblationVariant::NoCyclical,
        AblationVariant::NoCalendar,
        AblationVariant::RawIndices,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoCyclical => "no_cyclical",
            AblationVariant::NoCalendar => "no_calendar",
            AblationVariant::RawIndices => "raw_indices",
        }
    }

    pub fn encoding(self) -> EncodingConfig {
        match self {
            AblationVariant::Full => EncodingConfig::full(),
            AblationVariant::NoCyclical => EncodingConfig::no_cyclical(),
            AblationVariant::NoCalendar => EncodingConfig::no_calendar(),
            AblationVariant::RawIndices => EncodingConfig::raw_indices(),
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// One ablation variant's Day-1 and 7-day-average errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub day1: DayMetrics,
    pub avg: DayMetrics,
}

/// The four-variant ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub units: Units,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Four metric columns per variant row, mirroring the comparison-table
    /// layout: Day-1 MAE/RMSE then 7-day-average MAE/RMSE.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,day1_mae,day1_rmse,avg_mae,avg_rmse\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                row.variant, row.day1.mae, row.day1.rmse, row.avg.mae, row.avg.rmse
            ));
        }
        out
    }
}
