//! Daily consumption series: CSV ingestion, validation, min-max scaling and
//! chronological splitting.
//!
//! A [`DailySeries`] is strictly increasing in date and gap-free; raw values
//! are finite and non-negative. Scaling state is tracked in the type so that
//! normalize/denormalize misuse is caught at run time.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Whether consumption values are raw megawatts or min-max normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Raw,
    Normalized,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Raw => write!(f, "raw"),
            Scale::Normalized => write!(f, "normalized"),
        }
    }
}

/// One observed day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub consumption: f64,
}

/// Ordered, gap-free daily consumption records.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    records: Vec<DailyRecord>,
    scale: Scale,
}

impl DailySeries {
    /// Validates ordering, gap-freeness and value invariants.
    /// Raw series additionally reject negative values.
    pub fn new(records: Vec<DailyRecord>, scale: Scale) -> Result<Self> {
        for pair in records.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.date == a.date {
                return Err(Error::DuplicateDate(b.date));
            }
            if b.date < a.date {
                return Err(Error::InvalidConfig(format!(
                    "records out of order: {} after {}",
                    b.date, a.date
                )));
            }
            let expected = a.date.succ_opt().expect("date overflow");
            if b.date != expected {
                return Err(Error::DateGap(expected));
            }
        }
        for r in &records {
            if !r.consumption.is_finite() {
                return Err(Error::NonFiniteValue {
                    date: r.date,
                    value: r.consumption,
                });
            }
            if scale == Scale::Raw && r.consumption < 0.0 {
                return Err(Error::NegativeValue {
                    date: r.date,
                    value: r.consumption,
                });
            }
        }
        Ok(Self { records, scale })
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.consumption).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }

    /// Sub-series over a record index range (same scale).
    pub fn slice(&self, start: usize, end: usize) -> DailySeries {
        DailySeries {
            records: self.records[start..end].to_vec(),
            scale: self.scale,
        }
    }
}

/// How to treat missing dates during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// Any missing date is an error naming the first missing day.
    #[default]
    Reject,
    /// Missing days are linearly interpolated between their neighbours.
    LinearFill,
}

/// Result of loading a CSV, including any dates synthesized by gap filling.
#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub series: DailySeries,
    pub filled: Vec<NaiveDate>,
}

/// Loads a `date,consumption` CSV (ISO-8601 dates, optional header) into a
/// validated raw-scale series sorted by date.
pub fn load_csv(path: &Path) -> Result<DailySeries> {
    load_csv_with(path, GapPolicy::Reject).map(|o| o.series)
}

/// As [`load_csv`] but with an explicit gap policy; reports filled dates.
pub fn load_csv_with(path: &Path, policy: GapPolicy) -> Result<LoadOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => malformed(path, 0, e.to_string()),
        })?;

    let mut rows: Vec<DailyRecord> = Vec::new();
    for (idx, result) in reader.records().enumerate() {
        let record = result.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or(idx as u64 + 1);
            malformed(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        // Optional header row.
        if idx == 0
            && record.len() >= 2
            && record[0].eq_ignore_ascii_case("date")
            && record[1].eq_ignore_ascii_case("consumption")
        {
            continue;
        }
        if record.len() != 2 {
            return Err(malformed(
                path,
                line,
                format!("expected 2 fields `date,consumption`, got {}", record.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| malformed(path, line, format!("bad date `{}`: {e}", &record[0])))?;
        let consumption: f64 = record[1]
            .parse()
            .map_err(|e| malformed(path, line, format!("bad number `{}`: {e}", &record[1])))?;
        if !consumption.is_finite() {
            return Err(Error::NonFiniteValue {
                date,
                value: consumption,
            });
        }
        if consumption < 0.0 {
            return Err(Error::NegativeValue {
                date,
                value: consumption,
            });
        }
        rows.push(DailyRecord { date, consumption });
    }

    rows.sort_by_key(|r| r.date);
    for pair in rows.windows(2) {
        if pair[1].date == pair[0].date {
            return Err(Error::DuplicateDate(pair[1].date));
        }
    }

    let mut filled = Vec::new();
    let records = match policy {
        GapPolicy::Reject => rows,
        GapPolicy::LinearFill => fill_gaps(rows, &mut filled),
    };

    let series = DailySeries::new(records, Scale::Raw)?;
    Ok(LoadOutcome { series, filled })
}

fn malformed(path: &Path, line: u64, reason: String) -> Error {
    Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

fn fill_gaps(rows: Vec<DailyRecord>, filled: &mut Vec<NaiveDate>) -> Vec<DailyRecord> {
    let mut out: Vec<DailyRecord> = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(prev) = out.last().copied() {
            let span = (row.date - prev.date).num_days();
            for k in 1..span {
                let date = prev.date + chrono::Duration::days(k);
                let frac = k as f64 / span as f64;
                let consumption = prev.consumption + frac * (row.consumption - prev.consumption);
                filled.push(date);
                out.push(DailyRecord { date, consumption });
            }
        }
        out.push(row);
    }
    out
}

/// Min-max extrema of the fitting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: f64,
    pub max: f64,
}

impl NormalizationParams {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min) / self.range()
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.range() + self.min
    }
}

/// Fits min-max extrema over a raw series. Constant series are rejected.
pub fn fit_minmax(series: &DailySeries) -> Result<NormalizationParams> {
    if series.scale() != Scale::Raw {
        return Err(Error::ScaleMismatch {
            expected: Scale::Raw,
            actual: series.scale(),
        });
    }
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "min-max fit needs at least 2 records, got {}",
            series.len()
        )));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for r in series.records() {
        min = min.min(r.consumption);
        max = max.max(r.consumption);
    }
    if max <= min {
        return Err(Error::ConstantSeries(min));
    }
    Ok(NormalizationParams { min, max })
}

/// Maps each value v to (v - min) / (max - min). Values outside the fitting
/// window may leave [0, 1] and are not clipped.
pub fn normalize(series: &DailySeries, params: &NormalizationParams) -> Result<DailySeries> {
    if series.scale() != Scale::Raw {
        return Err(Error::ScaleMismatch {
            expected: Scale::Raw,
            actual: series.scale(),
        });
    }
    let records = series
        .records()
        .iter()
        .map(|r| DailyRecord {
            date: r.date,
            consumption: params.apply(r.consumption),
        })
        .collect();
    DailySeries::new(records, Scale::Normalized)
}

/// Inverse of [`normalize`].
pub fn denormalize(series: &DailySeries, params: &NormalizationParams) -> Result<DailySeries> {
    if series.scale() != Scale::Normalized {
        return Err(Error::ScaleMismatch {
            expected: Scale::Normalized,
            actual: series.scale(),
        });
    }
    let records = series
        .records()
        .iter()
        .map(|r| DailyRecord {
            date: r.date,
            consumption: params.invert(r.consumption),
        })
        .collect();
    DailySeries::new(records, Scale::Raw)
}

/// Splits the first floor(n * train_fraction) records off as the train side;
/// no shuffling, train strictly precedes test in time.
pub fn chronological_split(
    series: &DailySeries,
    train_fraction: f64,
) -> Result<(DailySeries, DailySeries)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = series.len();
    let cut = (n as f64 * train_fraction).floor() as usize;
    Ok((series.slice(0, cut), series.slice(cut, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn series_from(values: &[f64]) -> DailySeries {
        let start = date("2023-01-01");
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| DailyRecord {
                date: start + chrono::Duration::days(i as i64),
                consumption: v,
            })
            .collect();
        DailySeries::new(records, Scale::Raw).unwrap()
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_rows() {
        let f = write_csv("2023-01-01,70000\n2023-01-02,72000\n");
        let s = load_csv(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[0].date, date("2023-01-01"));
        assert_eq!(s.records()[1].consumption, 72000.0);
    }

    #[test]
    fn header_row_is_skipped() {
        let f = write_csv("date,consumption\n2023-01-01,70000\n");
        let s = load_csv(f.path()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn gap_error_names_missing_date() {
        let f = write_csv("2023-01-01,70000\n2023-01-03,72000\n");
        let err = load_csv(f.path()).unwrap_err();
        match err {
            Error::DateGap(d) => assert_eq!(d, date("2023-01-02")),
            other => panic!("expected DateGap, got {other:?}"),
        }
    }

    #[test]
    fn linear_fill_interpolates_gap() {
        let f = write_csv("2023-01-01,100\n2023-01-04,400\n");
        let out = load_csv_with(f.path(), GapPolicy::LinearFill).unwrap();
        assert_eq!(out.series.len(), 4);
        assert_eq!(out.filled, vec![date("2023-01-02"), date("2023-01-03")]);
        assert!((out.series.records()[1].consumption - 200.0).abs() < 1e-12);
        assert!((out.series.records()[2].consumption - 300.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_date_rejected() {
        let f = write_csv("2023-01-01,100\n2023-01-01,200\n");
        assert!(matches!(
            load_csv(f.path()).unwrap_err(),
            Error::DuplicateDate(_)
        ));
    }

    #[test]
    fn unsorted_rows_are_sorted_by_date() {
        let f = write_csv("2023-01-02,200\n2023-01-01,100\n");
        let s = load_csv(f.path()).unwrap();
        assert_eq!(s.records()[0].consumption, 100.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write_csv("2023-01-01,100\nnot-a-date,5\n");
        match load_csv(f.path()).unwrap_err() {
            Error::MalformedRow { line, .. } => assert_eq!(line, 2),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn negative_and_non_finite_rejected() {
        let f = write_csv("2023-01-01,-5\n");
        assert!(matches!(
            load_csv(f.path()).unwrap_err(),
            Error::NegativeValue { .. }
        ));
        let f = write_csv("2023-01-01,NaN\n");
        assert!(matches!(
            load_csv(f.path()).unwrap_err(),
            Error::NonFiniteValue { .. }
        ));
    }

    #[test]
    fn minmax_basic() {
        let p = fit_minmax(&series_from(&[10.0, 30.0, 20.0])).unwrap();
        assert_eq!(p.min, 10.0);
        assert_eq!(p.max, 30.0);
        let p = fit_minmax(&series_from(&[0.0, 100.0])).unwrap();
        assert_eq!((p.min, p.max), (0.0, 100.0));
    }

    #[test]
    fn minmax_rejects_constant() {
        assert!(matches!(
            fit_minmax(&series_from(&[5.0, 5.0, 5.0])).unwrap_err(),
            Error::ConstantSeries(_)
        ));
    }

    #[test]
    fn normalize_maps_and_does_not_clip() {
        let p = NormalizationParams { min: 0.0, max: 100.0 };
        assert_eq!(p.apply(50.0), 0.5);
        assert_eq!(p.apply(0.0), 0.0);
        assert!((p.apply(120.0) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn normalize_scale_mismatch() {
        let s = series_from(&[1.0, 2.0]);
        let p = fit_minmax(&s).unwrap();
        let n = normalize(&s, &p).unwrap();
        assert!(matches!(
            normalize(&n, &p).unwrap_err(),
            Error::ScaleMismatch { .. }
        ));
        assert!(matches!(
            denormalize(&s, &p).unwrap_err(),
            Error::ScaleMismatch { .. }
        ));
    }

    #[test]
    fn normalize_round_trip_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..200);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1e6)).collect();
            let s = series_from(&values);
            let p = match fit_minmax(&s) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let back = denormalize(&normalize(&s, &p).unwrap(), &p).unwrap();
            for (a, b) in s.records().iter().zip(back.records()) {
                let rel = (a.consumption - b.consumption).abs()
                    / a.consumption.abs().max(1.0);
                assert!(rel < 1e-12, "round trip off by {rel}");
            }
        }
    }

    #[test]
    fn split_floor_arithmetic() {
        let s = series_from(&vec![1.0; 365]);
        let (train, test) = chronological_split(&s, 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (292, 73));

        let s = series_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        let (train, test) = chronological_split(&s, 0.5).unwrap();
        assert_eq!((train.len(), test.len()), (5, 5));
    }

    #[test]
    fn split_is_chronologically_contiguous() {
        let s = series_from(&vec![1.0; 365]);
        let (train, test) = chronological_split(&s, 0.8).unwrap();
        let next = train.last_date().unwrap().succ_opt().unwrap();
        assert_eq!(next, test.first_date().unwrap());
    }

    #[test]
    fn split_is_deterministic() {
        let s = series_from(&(0..100).map(|i| i as f64).collect::<Vec<_>>());
        let a = chronological_split(&s, 0.8).unwrap();
        let b = chronological_split(&s, 0.8).unwrap();
        assert_eq!(a.0.values(), b.0.values());
        assert_eq!(a.1.values(), b.1.values());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let s = series_from(&[1.0, 2.0]);
        assert!(chronological_split(&s, 0.0).is_err());
        assert!(chronological_split(&s, 1.0).is_err());
    }
}
