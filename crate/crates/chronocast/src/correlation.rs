//! Pearson correlation between calendar features (raw and trig-encoded)
//! and daily consumption, plus the encoding-selection rule built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    build_feature_frame, CalendarFeature, EncodingConfig, FeatureEncoding,
};
use crate::series::DailySeries;

/// Sample Pearson correlation coefficient, clamped to `[-1, 1]` to absorb
/// floating-point drift. Errors when lengths differ, fewer than two points
/// are given, or either vector is constant.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::ConstantVector);
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0))
}

/// Correlations of one calendar feature (raw, sin, cos) with consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: CalendarFeature,
    pub r_raw: f64,
    pub r_sin: f64,
    pub r_cos: f64,
    /// Encoding with the largest `|r|`; ties resolve raw, then sin, then cos.
    pub selected: FeatureEncoding,
}

impl FeatureCorrelation {
    pub fn best_abs_r(&self) -> f64 {
        self.r_raw.abs().max(self.r_sin.abs()).max(self.r_cos.abs())
    }
}

/// Full correlation table over the seven calendar features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<FeatureCorrelation>,
}

impl CorrelationReport {
    pub fn row(&self, feature: CalendarFeature) -> Option<&FeatureCorrelation> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    /// Renders the table as CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,r_raw,r_sin,r_cos,selected\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{}\n",
                row.feature.name(),
                row.r_raw,
                row.r_sin,
                row.r_cos,
                row.selected
            ));
        }
        out
    }
}

fn select_encoding(feature: CalendarFeature, r_raw: f64, r_sin: f64, r_cos: f64) -> FeatureEncoding {
    // Low-information features are excluded from model input regardless of
    // which of their encodings scores best.
    if matches!(
        feature,
        CalendarFeature::DayInMonth | CalendarFeature::WeekInMonth
    ) {
        return FeatureEncoding::Drop;
    }
    if feature == CalendarFeature::BusinessDay {
        return FeatureEncoding::Raw;
    }
    let best = r_raw.abs().max(r_sin.abs()).max(r_cos.abs());
    if r_raw.abs() >= best {
        FeatureEncoding::Raw
    } else if r_sin.abs() >= best {
        FeatureEncoding::Sin
    } else {
        FeatureEncoding::Cos
    }
}

/// Computes the raw/sin/cos correlation table for every calendar feature
/// against normalized consumption. The binary business-day flag has no trig
/// variants; its raw coefficient is reported in all three columns.
pub fn correlation_report(series: &DailySeries) -> Result<CorrelationReport> {
    // An all-encodings frame: every feature raw, plus separate sin/cos passes.
    let raw_cfg = EncodingConfig {
        name: "analysis-raw".to_string(),
        choices: CalendarFeature::ALL
            .iter()
            .map(|&f| (f, FeatureEncoding::Raw))
            .collect(),
    };
    let sin_cfg = EncodingConfig {
        name: "analysis-sin".to_string(),
        choices: CalendarFeature::ALL
            .iter()
            .map(|&f| {
                let enc = if f == CalendarFeature::BusinessDay {
                    FeatureEncoding::Raw
                } else {
                    FeatureEncoding::Sin
                };
                (f, enc)
            })
            .collect(),
    };
    let cos_cfg = EncodingConfig {
        name: "analysis-cos".to_string(),
        choices: CalendarFeature::ALL
            .iter()
            .map(|&f| {
                let enc = if f == CalendarFeature::BusinessDay {
                    FeatureEncoding::Raw
                } else {
                    FeatureEncoding::Cos
                };
                (f, enc)
            })
            .collect(),
    };

    let raw_frame = build_feature_frame(series, &raw_cfg)?;
    let sin_frame = build_feature_frame(series, &sin_cfg)?;
    let cos_frame = build_feature_frame(series, &cos_cfg)?;
    let consumption = raw_frame.consumption();

    let mut rows = Vec::with_capacity(7);
    for &feature in &CalendarFeature::ALL {
        let raw_name = if feature == CalendarFeature::BusinessDay {
            "business_day".to_string()
        } else {
            format!("{}_raw", feature.name())
        };
        let r_raw = pearson_r(raw_frame.column(&raw_name).unwrap(), consumption)?;
        let (r_sin, r_cos) = if feature == CalendarFeature::BusinessDay {
            (r_raw, r_raw)
        } else {
            let sin_col = sin_frame
                .column(&format!("{}_sin", feature.name()))
                .unwrap();
            let cos_col = cos_frame
                .column(&format!("{}_cos", feature.name()))
                .unwrap();
            (
                pearson_r(sin_col, consumption)?,
                pearson_r(cos_col, consumption)?,
            )
        };
        rows.push(FeatureCorrelation {
            feature,
            r_raw,
            r_sin,
            r_cos,
            selected: select_encoding(feature, r_raw, r_sin, r_cos),
        });
    }
    Ok(CorrelationReport { rows })
}

/// Summary statistics of consumption grouped by a raw calendar feature value
/// (e.g. mean consumption per day-of-week).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub feature: CalendarFeature,
    pub groups: Vec<GroupStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub value: u32,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of an already sorted slice
/// (index `q * (n - 1)`, fractional part interpolated).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::ConstantVector);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("quantile {q} outside [0, 1]")));
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Groups consumption by the integer value of `feature` and summarizes each
/// group with count, mean and quartiles.
pub fn group_summary(series: &DailySeries, feature: CalendarFeature) -> Result<GroupSummary> {
    use crate::calendar::extract_calendar;
    use std::collections::BTreeMap;

    let mut buckets: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for record in series.records() {
        let value = feature.value(&extract_calendar(record.date)) as u32;
        buckets.entry(value).or_default().push(record.consumption);
    }
    let mut groups = Vec::with_capacity(buckets.len());
    for (value, mut vals) in buckets {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let count = vals.len();
        let mean = vals.iter().sum::<f64>() / count as f64;
        groups.push(GroupStats {
            value,
            count,
            mean,
            min: vals[0],
            q1: quantile_sorted(&vals, 0.25)?,
            median: quantile_sorted(&vals, 0.5)?,
            q3: quantile_sorted(&vals, 0.75)?,
            max: vals[count - 1],
        });
    }
    Ok(GroupSummary { feature, groups })
}
