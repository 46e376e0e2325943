//! Sliding-window construction: 120 feature rows in, the next 7 days of
//! consumption out.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::features::FeatureFrame;

/// Default input window length in days.
pub const INPUT_LEN: usize = 120;
/// Default forecast horizon in days.
pub const HORIZON: usize = 7;

/// A supervised dataset of flattened input windows and multi-day targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub input_len: usize,
    pub horizon: usize,
    pub feature_count: usize,
    /// Row-major `[n_windows * input_len * feature_count]`; window `w`, time
    /// step `t`, feature `f` lives at `((w * input_len) + t) * feature_count + f`.
    pub inputs: Vec<f64>,
    /// Row-major `[n_windows * horizon]` normalized consumption targets.
    pub targets: Vec<f64>,
    /// Date of the first forecast day of each window.
    pub target_start_dates: Vec<NaiveDate>,
}

impl WindowedDataset {
    pub fn n_windows(&self) -> usize {
        self.target_start_dates.len()
    }

    pub fn input(&self, w: usize) -> &[f64] {
        let stride = self.input_len * self.feature_count;
        &self.inputs[w * stride..(w + 1) * stride]
    }

    pub fn target(&self, w: usize) -> &[f64] {
        &self.targets[w * self.horizon..(w + 1) * self.horizon]
    }

    /// Dataset containing windows `[start, end)` of `self`.
    pub fn slice(&self, start: usize, end: usize) -> WindowedDataset {
        let stride = self.input_len * self.feature_count;
        WindowedDataset {
            input_len: self.input_len,
            horizon: self.horizon,
            feature_count: self.feature_count,
            inputs: self.inputs[start * stride..end * stride].to_vec(),
            targets: self.targets[start * self.horizon..end * self.horizon].to_vec(),
            target_start_dates: self.target_start_dates[start..end].to_vec(),
        }
    }
}

/// Slides a `(input_len, horizon)` window over the frame. A frame of `n` rows
/// yields `n - input_len - horizon + 1` windows; window `w` reads feature rows
/// `[w, w + input_len)` and targets consumption rows
/// `[w + input_len, w + input_len + horizon)`.
pub fn make_windows(frame: &FeatureFrame, input_len: usize, horizon: usize) -> Result<WindowedDataset> {
    if input_len == 0 || horizon == 0 {
        return Err(Error::InvalidConfig(
            "window length and horizon must be positive".to_string(),
        ));
    }
    let n = frame.len();
    let needed = input_len + horizon;
    if n < needed {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot fit one {input_len}-day window plus {horizon}-day target \
             ({needed} rows required)"
        )));
    }
    let n_windows = n - needed + 1;
    let feature_count = frame.feature_count();
    let consumption = frame.consumption();
    let dates = frame.dates();

    let mut inputs = Vec::with_capacity(n_windows * input_len * feature_count);
    let mut targets = Vec::with_capacity(n_windows * horizon);
    let mut target_start_dates = Vec::with_capacity(n_windows);
    let mut row = vec![0.0; feature_count];

    for w in 0..n_windows {
        for t in w..w + input_len {
            frame.fill_row(t, &mut row);
            inputs.extend_from_slice(&row);
        }
        targets.extend_from_slice(&consumption[w + input_len..w + input_len + horizon]);
        target_start_dates.push(dates[w + input_len]);
    }

    Ok(WindowedDataset {
        input_len,
        horizon,
        feature_count,
        inputs,
        targets,
        target_start_dates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_feature_frame, EncodingConfig};
    use crate::series::{DailyRecord, DailySeries, Scale};
    use chrono::NaiveDate;

    fn frame(days: usize) -> FeatureFrame {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let records: Vec<DailyRecord> = (0..days)
            .map(|i| DailyRecord {
                date: start + chrono::Duration::days(i as i64),
                consumption: i as f64 / days as f64,
            })
            .collect();
        let series = DailySeries::new(records, Scale::Normalized).unwrap();
        build_feature_frame(&series, &EncodingConfig::full()).unwrap()
    }

    #[test]
    fn minimum_length_yields_single_window() {
        let ds = make_windows(&frame(127), INPUT_LEN, HORIZON).unwrap();
        assert_eq!(ds.n_windows(), 1);
        assert_eq!(ds.input(0).len(), 120 * 6);
        assert_eq!(ds.target(0).len(), 7);
    }

    #[test]
    fn one_twenty_six_days_is_too_short() {
        assert!(make_windows(&frame(126), INPUT_LEN, HORIZON).is_err());
    }

    #[test]
    fn window_count_formula() {
        assert_eq!(make_windows(&frame(130), INPUT_LEN, HORIZON).unwrap().n_windows(), 4);
        assert_eq!(make_windows(&frame(292), INPUT_LEN, HORIZON).unwrap().n_windows(), 166);
        assert_eq!(make_windows(&frame(365), INPUT_LEN, HORIZON).unwrap().n_windows(), 239);
    }

    #[test]
    fn first_window_targets_days_121_to_127() {
        let ds = make_windows(&frame(130), INPUT_LEN, HORIZON).unwrap();
        // Day 121 (1-indexed) of a series starting 2023-01-01 is 2023-05-01.
        assert_eq!(
            ds.target_start_dates[0],
            NaiveDate::from_ymd_opt(2023, 5, 1).unwrap()
        );
        let expect: Vec<f64> = (120..127).map(|i| i as f64 / 130.0).collect();
        for (a, b) in ds.target(0).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn windows_advance_one_day_at_a_time() {
        let ds = make_windows(&frame(140), INPUT_LEN, HORIZON).unwrap();
        for w in 1..ds.n_windows() {
            assert_eq!(
                ds.target_start_dates[w] - ds.target_start_dates[w - 1],
                chrono::Duration::days(1)
            );
        }
    }

    #[test]
    fn input_rows_match_frame_rows() {
        let f = frame(130);
        let ds = make_windows(&f, INPUT_LEN, HORIZON).unwrap();
        let mut row = vec![0.0; f.feature_count()];
        // Window 2 starts at frame row 2.
        f.fill_row(2, &mut row);
        assert_eq!(&ds.input(2)[..f.feature_count()], row.as_slice());
        f.fill_row(2 + 119, &mut row);
        assert_eq!(&ds.input(2)[119 * f.feature_count()..], row.as_slice());
    }

    #[test]
    fn slice_preserves_geometry() {
        let ds = make_windows(&frame(140), INPUT_LEN, HORIZON).unwrap();
        let part = ds.slice(3, 9);
        assert_eq!(part.n_windows(), 6);
        assert_eq!(part.input(0), ds.input(3));
        assert_eq!(part.target(5), ds.target(8));
        assert_eq!(part.target_start_dates[0], ds.target_start_dates[3]);
    }

    #[test]
    fn zero_geometry_rejected() {
        let f = frame(130);
        assert!(make_windows(&f, 0, 7).is_err());
        assert!(make_windows(&f, 120, 0).is_err());
    }
}
