//! Run configuration: defaults, flat key = value file parsing, and
//! translation into the engine's pipeline configuration.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use chronocast::ensemble::{full_grid, small_grid};
use chronocast::eval::Units;
use chronocast::features::EncodingConfig;
use chronocast::pipeline::PipelineConfig;
use chronocast::series::{load_csv_with, DailySeries, GapPolicy, LoadOutcome};
use chronocast::{Error, Result};

/// Which meta-regressor search grid to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Full,
    Small,
}

/// Everything a command needs, assembled from defaults, an optional config
/// file, and command-line flags (later sources win).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub units: Units,
    pub fill_gaps: bool,
    pub input_csv: Option<PathBuf>,
    pub encoding: String,
    pub split_fraction: f64,
    pub input_len: usize,
    pub horizon: usize,
    pub grid: GridChoice,
    pub base_epochs: usize,
    pub refit_bases: bool,
    pub synth_days: usize,
    pub synth_noise: f64,
    pub synth_start: NaiveDate,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            units: Units::Normalized,
            fill_gaps: false,
            input_csv: None,
            encoding: "full".to_string(),
            split_fraction: 0.8,
            input_len: 120,
            horizon: 7,
            grid: GridChoice::Full,
            base_epochs: 80,
            refit_bases: false,
            synth_days: 730,
            synth_noise: 1500.0,
            synth_start: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("config key {key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::InvalidConfig(format!(
            "config key {key}: expected true/false, got {other:?}"
        ))),
    }
}

impl RunConfig {
    /// Applies a flat `key = value` file. Lines starting with `#` and blank
    /// lines are ignored; unknown keys are rejected so typos fail loudly.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}:{}: expected key = value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "seed" => self.seed = parse_value(key, value)?,
                "out_dir" => self.out_dir = PathBuf::from(value),
                "units" => {
                    self.units = match value {
                        "normalized" => Units::Normalized,
                        "mw" => Units::Mw,
                        other => {
                            return Err(Error::InvalidConfig(format!(
                                "config key units: expected normalized or mw, got {other:?}"
                            )))
                        }
                    }
                }
                "fill_gaps" => self.fill_gaps = parse_bool(key, value)?,
                "input_csv" => self.input_csv = Some(PathBuf::from(value)),
                "encoding" => self.encoding = value.to_string(),
                "split_fraction" => self.split_fraction = parse_value(key, value)?,
                "input_len" => self.input_len = parse_value(key, value)?,
                "horizon" => self.horizon = parse_value(key, value)?,
                "grid" => {
                    self.grid = match value {
                        "full" => GridChoice::Full,
                        "small" => GridChoice::Small,
                        other => {
                            return Err(Error::InvalidConfig(format!(
                                "config key grid: expected full or small, got {other:?}"
                            )))
                        }
                    }
                }
                "base_epochs" => self.base_epochs = parse_value(key, value)?,
                "refit_bases" => self.refit_bases = parse_bool(key, value)?,
                "synth_days" => self.synth_days = parse_value(key, value)?,
                "synth_noise" => self.synth_noise = parse_value(key, value)?,
                "synth_start" => self.synth_start = parse_value(key, value)?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{}: unknown config key {other:?}",
                        path.display()
                    )))
                }
            }
        }
        Ok(())
    }

    /// Resolves the encoding field: a built-in variant name or a path to a
    /// JSON encoding config.
    pub fn resolve_encoding(&self) -> Result<EncodingConfig> {
        if let Some(encoding) = EncodingConfig::by_name(&self.encoding) {
            return Ok(encoding);
        }
        let path = Path::new(&self.encoding);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            let encoding: EncodingConfig = serde_json::from_str(&text)?;
            encoding.validate()?;
            return Ok(encoding);
        }
        Err(Error::InvalidConfig(format!(
            "encoding {:?} is neither a built-in variant (full, no_cyclical, \
             no_calendar, raw_indices) nor an existing JSON file",
            self.encoding
        )))
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            split_fraction: self.split_fraction,
            input_len: self.input_len,
            horizon: self.horizon,
            encoding: self.resolve_encoding()?,
            base_epochs: self.base_epochs,
            grid: match self.grid {
                GridChoice::Full => full_grid(),
                GridChoice::Small => small_grid(),
            },
            refit_bases: self.refit_bases,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads the input CSV with the configured gap policy, reporting any
    /// interpolated dates.
    pub fn load_series(&self) -> Result<LoadOutcome> {
        let path = self.input_csv.as_deref().ok_or_else(|| {
            Error::InvalidConfig(
                "no input CSV: pass --input or set input_csv in the config file".into(),
            )
        })?;
        let policy = if self.fill_gaps {
            GapPolicy::LinearFill
        } else {
            GapPolicy::Reject
        };
        load_csv_with(path, policy)
    }

    /// Loads the input CSV and reports gap fills on stderr.
    pub fn load_series_reporting(&self) -> Result<DailySeries> {
        let outcome = self.load_series()?;
        if !outcome.filled.is_empty() {
            eprintln!(
                "note: interpolated {} missing day(s), first {}",
                outcome.filled.len(),
                outcome.filled[0]
            );
        }
        Ok(outcome.series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_file_overrides_defaults_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f, "seed = 7").unwrap();
        writeln!(f, "grid = small").unwrap();
        writeln!(f, "units = mw").unwrap();
        writeln!(f, "synth_noise = 250.5").unwrap();
        drop(f);

        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.grid, GridChoice::Small);
        assert_eq!(cfg.units, Units::Mw);
        assert!((cfg.synth_noise - 250.5).abs() < 1e-12);

        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "sede = 7").unwrap();
        drop(f);
        let err = RunConfig::default().apply_file(&path).unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn encoding_resolution_accepts_names_and_json_files() {
        let mut cfg = RunConfig::default();
        cfg.encoding = "raw_indices".into();
        assert!(cfg.resolve_encoding().is_ok());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.json");
        let custom = EncodingConfig::no_calendar();
        std::fs::write(&path, serde_json::to_string(&custom).unwrap()).unwrap();
        cfg.encoding = path.display().to_string();
        let resolved = cfg.resolve_encoding().unwrap();
        assert_eq!(resolved.column_names(), custom.column_names());

        cfg.encoding = "not-a-variant".into();
        assert!(cfg.resolve_encoding().unwrap_err().is_input_error());
    }
}
