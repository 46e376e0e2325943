//! Cyclical encoding of calendar features and feature-frame assembly.
//!
//! Periodic integer features are mapped to sin/cos of `2*pi*F/cycle`, which
//! removes the value reset at the end of each cycle. Raw columns are stored
//! as `F/cycle`; Pearson correlation is invariant under that scaling and the
//! sawtooth discontinuity is preserved, while network inputs stay O(1).

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::calendar::{extract_calendar, CalendarFeatures};
use crate::error::{Error, Result};
use crate::series::{DailySeries, Scale};

/// The calendar granularities studied for correlation with consumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarFeature {
    DayInYear,
    WeekInYear,
    MonthInYear,
    DayInWeek,
    DayInMonth,
    WeekInMonth,
    BusinessDay,
}

impl CalendarFeature {
    /// Canonical ordering used for report rows and frame columns.
    pub const ALL: [CalendarFeature; 7] = [
        CalendarFeature::DayInYear,
        CalendarFeature::WeekInYear,
        CalendarFeature::MonthInYear,
        CalendarFeature::DayInWeek,
        CalendarFeature::DayInMonth,
        CalendarFeature::WeekInMonth,
        CalendarFeature::BusinessDay,
    ];

    /// Natural period of the feature. Leap years keep cycle 365 for
    /// day-in-year (one-day phase error accepted).
    pub fn cycle(self) -> f64 {
        match self {
            CalendarFeature::DayInYear => 365.0,
            CalendarFeature::WeekInYear => 52.0,
            CalendarFeature::MonthInYear => 12.0,
            CalendarFeature::DayInWeek => 7.0,
            CalendarFeature::DayInMonth => 31.0,
            CalendarFeature::WeekInMonth => 5.0,
            CalendarFeature::BusinessDay => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CalendarFeature::DayInYear => "day_in_year",
            CalendarFeature::WeekInYear => "week_in_year",
            CalendarFeature::MonthInYear => "month_in_year",
            CalendarFeature::DayInWeek => "day_in_week",
            CalendarFeature::DayInMonth => "day_in_month",
            CalendarFeature::WeekInMonth => "week_in_month",
            CalendarFeature::BusinessDay => "business_day",
        }
    }

    pub fn value(self, f: &CalendarFeatures) -> f64 {
        match self {
            CalendarFeature::DayInYear => f.day_in_year as f64,
            CalendarFeature::WeekInYear => f.week_in_year as f64,
            CalendarFeature::MonthInYear => f.month_in_year as f64,
            CalendarFeature::DayInWeek => f.day_in_week as f64,
            CalendarFeature::DayInMonth => f.day_in_month as f64,
            CalendarFeature::WeekInMonth => f.week_in_month as f64,
            CalendarFeature::BusinessDay => f.business_day as f64,
        }
    }
}

impl fmt::Display for CalendarFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl FromStr for CalendarFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CalendarFeature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

/// Per-feature encoding choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureEncoding {
    Raw,
    Sin,
    Cos,
    Drop,
}

impl fmt::Display for FeatureEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureEncoding::Raw => "raw",
            FeatureEncoding::Sin => "sin",
            FeatureEncoding::Cos => "cos",
            FeatureEncoding::Drop => "drop",
        };
        write!(f, "{s}")
    }
}

/// `F_sin = sin(2*pi*F/cycle)`.
pub fn cyclical_sin(f: f64, time_cycle: f64) -> Result<f64> {
    if !(time_cycle > 0.0) {
        return Err(Error::NonPositiveCycle(time_cycle));
    }
    Ok((TAU * f / time_cycle).sin())
}

/// `F_cos = cos(2*pi*F/cycle)`.
pub fn cyclical_cos(f: f64, time_cycle: f64) -> Result<f64> {
    if !(time_cycle > 0.0) {
        return Err(Error::NonPositiveCycle(time_cycle));
    }
    Ok((TAU * f / time_cycle).cos())
}

/// Named per-feature encoding assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub name: String,
    /// One entry per calendar feature, in [`CalendarFeature::ALL`] order.
    pub choices: Vec<(CalendarFeature, FeatureEncoding)>,
}

impl EncodingConfig {
    fn from_table(name: &str, table: [FeatureEncoding; 7]) -> Self {
        EncodingConfig {
            name: name.to_string(),
            choices: CalendarFeature::ALL
                .iter()
                .copied()
                .zip(table)
                .collect(),
        }
    }

    /// Default encoding: consumption plus cos(day-in-year), cos(week-in-year),
    /// cos(month-in-year), sin(day-in-week) and the business-day flag.
    pub fn full() -> Self {
        use FeatureEncoding::*;
        Self::from_table("full", [Cos, Cos, Cos, Sin, Drop, Drop, Raw])
    }

    /// Variant keeping day-in-week untransformed.
    pub fn full_raw_dow() -> Self {
        use FeatureEncoding::*;
        Self::from_table("full-raw-dow", [Cos, Cos, Cos, Raw, Drop, Drop, Raw])
    }

    /// Ablation: same features as `full` but all periodic ones raw.
    pub fn no_cyclical() -> Self {
        use FeatureEncoding::*;
        Self::from_table("no-cyclical", [Raw, Raw, Raw, Raw, Drop, Drop, Raw])
    }

    /// Ablation: cyclical encodings only, business-day flag dropped.
    pub fn no_calendar() -> Self {
        use FeatureEncoding::*;
        Self::from_table("no-calendar", [Cos, Cos, Cos, Sin, Drop, Drop, Drop])
    }

    /// Ablation: raw time indices only, no trig, no business-day flag.
    pub fn raw_indices() -> Self {
        use FeatureEncoding::*;
        Self::from_table("raw-indices", [Raw, Raw, Raw, Raw, Drop, Drop, Drop])
    }

    /// Looks up a built-in configuration; hyphens and underscores are
    /// interchangeable in the name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name.replace('_', "-").as_str() {
            "full" => Some(Self::full()),
            "full-raw-dow" => Some(Self::full_raw_dow()),
            "no-cyclical" => Some(Self::no_cyclical()),
            "no-calendar" => Some(Self::no_calendar()),
            "raw-indices" => Some(Self::raw_indices()),
            _ => None,
        }
    }

    /// The business-day flag is binary and exempt from trig transforms.
    pub fn validate(&self) -> Result<()> {
        if self.choices.len() != 7 {
            return Err(Error::InvalidConfig(format!(
                "expected 7 feature choices, got {}",
                self.choices.len()
            )));
        }
        for (i, (feature, choice)) in self.choices.iter().enumerate() {
            if *feature != CalendarFeature::ALL[i] {
                return Err(Error::InvalidConfig(format!(
                    "feature {} out of canonical order",
                    feature.name()
                )));
            }
            if *feature == CalendarFeature::BusinessDay
                && matches!(choice, FeatureEncoding::Sin | FeatureEncoding::Cos)
            {
                return Err(Error::InvalidConfig(
                    "business_day cannot be trig-transformed".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Column names produced by [`build_feature_frame`], consumption first.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["consumption".to_string()];
        for (feature, choice) in &self.choices {
            match choice {
                FeatureEncoding::Drop => {}
                FeatureEncoding::Raw if *feature == CalendarFeature::BusinessDay => {
                    names.push("business_day".to_string());
                }
                other => names.push(format!("{}_{other}", feature.name())),
            }
        }
        names
    }

    pub fn feature_count(&self) -> usize {
        self.column_names().len()
    }
}

/// Per-day engineered feature vectors under one encoding configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    /// Column-major storage; every column has `dates.len()` entries.
    columns: Vec<Vec<f64>>,
    config: EncodingConfig,
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Normalized consumption column (always column 0).
    pub fn consumption(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    /// Copies row `i` into `out` (length `feature_count`).
    pub fn fill_row(&self, i: usize, out: &mut [f64]) {
        for (j, col) in self.columns.iter().enumerate() {
            out[j] = col[i];
        }
    }

    /// Frame restricted to rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> FeatureFrame {
        FeatureFrame {
            dates: self.dates[start..end].to_vec(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c[start..end].to_vec())
                .collect(),
            config: self.config.clone(),
        }
    }
}

/// Builds the per-day feature matrix from a normalized series: column 0 is
/// the normalized consumption, followed by the encoded calendar columns in
/// canonical order. Raw columns store `F/cycle`.
pub fn build_feature_frame(series: &DailySeries, config: &EncodingConfig) -> Result<FeatureFrame> {
    if series.scale() != Scale::Normalized {
        return Err(Error::ScaleMismatch {
            expected: Scale::Normalized,
            actual: series.scale(),
        });
    }
    config.validate()?;

    let names = config.column_names();
    let n = series.len();
    let mut columns: Vec<Vec<f64>> = names.iter().map(|_| Vec::with_capacity(n)).collect();

    for record in series.records() {
        let cal = extract_calendar(record.date);
        columns[0].push(record.consumption);
        let mut idx = 1;
        for (feature, choice) in &config.choices {
            let value = feature.value(&cal);
            let cycle = feature.cycle();
            let encoded = match choice {
                FeatureEncoding::Drop => continue,
                FeatureEncoding::Raw => value / cycle,
                FeatureEncoding::Sin => cyclical_sin(value, cycle)?,
                FeatureEncoding::Cos => cyclical_cos(value, cycle)?,
            };
            columns[idx].push(encoded);
            idx += 1;
        }
    }

    Ok(FeatureFrame {
        dates: series.dates(),
        names,
        columns,
        config: config.clone(),
    })
}
