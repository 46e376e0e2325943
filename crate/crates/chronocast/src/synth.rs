//! Seeded synthetic daily-consumption generator with the seasonal structure
//! of a national grid: annual cosine, weekly dips, holiday troughs, noise.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calendar::{extract_calendar, is_french_holiday};
use crate::error::{Error, Result};
use crate::series::{DailyRecord, DailySeries, Scale};

/// Parameters of the synthetic generator, in megawatts.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub start: NaiveDate,
    pub days: usize,
    /// Annual mean level.
    pub base_level: f64,
    /// Amplitude of the annual cosine (winter peak, summer trough).
    pub annual_amplitude: f64,
    /// Additive offset per day of week, Monday first.
    pub weekly_offsets: [f64; 7],
    /// Additive offset applied on public holidays.
    pub holiday_offset: f64,
    /// Standard deviation of the Gaussian noise; zero disables it.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            days: 730,
            base_level: 70_000.0,
            annual_amplitude: 12_000.0,
            weekly_offsets: [500.0, 800.0, 700.0, 600.0, 200.0, -5_000.0, -7_000.0],
            holiday_offset: -5_000.0,
            noise_std: 1_500.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Deterministic profile with the noise term removed.
    pub fn noiseless(mut self) -> Self {
        self.noise_std = 0.0;
        self
    }
}

/// Deterministic seasonal component of the generator (everything but noise).
pub fn seasonal_level(config: &SynthConfig, date: NaiveDate) -> f64 {
    let cal = extract_calendar(date);
    let annual = config.annual_amplitude
        * (std::f64::consts::TAU * cal.day_in_year as f64 / 365.0).cos();
    let weekly = config.weekly_offsets[(cal.day_in_week - 1) as usize];
    let holiday = if is_french_holiday(date) {
        config.holiday_offset
    } else {
        0.0
    };
    config.base_level + annual + weekly + holiday
}

/// Generates a gap-free raw daily series. The same config always produces
/// the same series. At least 128 days are required so that downstream
/// windowing has at least one training window after a chronological split.
pub fn generate(config: &SynthConfig) -> Result<DailySeries> {
    if config.days < 128 {
        return Err(Error::InvalidConfig(format!(
            "synthetic series needs at least 128 days, got {}",
            config.days
        )));
    }
    if config.noise_std < 0.0 || !config.noise_std.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise standard deviation {} must be finite and non-negative",
            config.noise_std
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = if config.noise_std > 0.0 {
        Some(Normal::new(0.0, config.noise_std).map_err(|e| {
            Error::InvalidConfig(format!("bad noise distribution: {e}"))
        })?)
    } else {
        None
    };

    let mut records = Vec::with_capacity(config.days);
    for i in 0..config.days {
        let date = config.start + chrono::Duration::days(i as i64);
        let mut level = seasonal_level(config, date);
        if let Some(dist) = &noise {
            level += dist.sample(&mut rng);
        }
        // A national load never drops to zero; floor guards pathological
        // configs rather than realistic ones.
        records.push(DailyRecord {
            date,
            consumption: level.max(0.0),
        });
    }
    DailySeries::new(records, Scale::Raw)
}

/// Writes a series as `date,consumption` CSV with a header row.
pub fn write_csv(series: &DailySeries, path: &std::path::Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    writer
        .write_record(["date", "consumption"])
        .map_err(|e| csv_io(path, e))?;
    for record in series.records() {
        writer
            .write_record([
                record.date.format("%Y-%m-%d").to_string(),
                format!("{:.3}", record.consumption),
            ])
            .map_err(|e| csv_io(path, e))?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn csv_io(path: &std::path::Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::load_csv;

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig::default();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&SynthConfig::default()).unwrap();
        let b = generate(&SynthConfig {
            seed: 43,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn noiseless_profile_matches_seasonal_level() {
        let config = SynthConfig::default().noiseless();
        let series = generate(&config).unwrap();
        for record in series.records() {
            let expect = seasonal_level(&config, record.date);
            assert!((record.consumption - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn weekends_sit_below_weekdays_on_average() {
        let series = generate(&SynthConfig::default()).unwrap();
        let mut weekday = (0.0, 0usize);
        let mut weekend = (0.0, 0usize);
        for record in series.records() {
            let dow = extract_calendar(record.date).day_in_week;
            if dow >= 6 {
                weekend = (weekend.0 + record.consumption, weekend.1 + 1);
            } else {
                weekday = (weekday.0 + record.consumption, weekday.1 + 1);
            }
        }
        assert!(weekend.0 / weekend.1 as f64 + 3_000.0 < weekday.0 / weekday.1 as f64);
    }

    #[test]
    fn winter_exceeds_summer() {
        let series = generate(&SynthConfig::default().noiseless()).unwrap();
        let jan: Vec<f64> = series
            .records()
            .iter()
            .filter(|r| r.date.format("%m").to_string() == "01")
            .map(|r| r.consumption)
            .collect();
        let jul: Vec<f64> = series
            .records()
            .iter()
            .filter(|r| r.date.format("%m").to_string() == "07")
            .map(|r| r.consumption)
            .collect();
        let jan_mean = jan.iter().sum::<f64>() / jan.len() as f64;
        let jul_mean = jul.iter().sum::<f64>() / jul.len() as f64;
        assert!(jan_mean > jul_mean + 15_000.0);
    }

    #[test]
    fn holidays_are_depressed() {
        let config = SynthConfig::default().noiseless();
        // 2023-07-14 (Friday, holiday) vs 2023-07-21 (plain Friday).
        let holiday = seasonal_level(&config, NaiveDate::from_ymd_opt(2023, 7, 14).unwrap());
        let plain = seasonal_level(&config, NaiveDate::from_ymd_opt(2023, 7, 21).unwrap());
        let diff = plain - holiday;
        // Same weekday; only the holiday offset and a week of annual drift differ.
        assert!(diff > 4_000.0 && diff < 6_000.0, "diff={diff}");
    }

    #[test]
    fn too_short_request_rejected() {
        let config = SynthConfig {
            days: 100,
            ..SynthConfig::default()
        };
        assert!(generate(&config).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        let series = generate(&SynthConfig {
            days: 150,
            ..SynthConfig::default()
        })
        .unwrap();
        write_csv(&series, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(loaded.len(), series.len());
        for (a, b) in loaded.records().iter().zip(series.records()) {
            assert_eq!(a.date, b.date);
            assert!((a.consumption - b.consumption).abs() < 5e-4);
        }
    }
}
