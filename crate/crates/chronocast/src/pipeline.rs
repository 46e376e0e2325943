//! End-to-end orchestration: normalize, encode, window, train bases, fit
//! per-day meta regressors by grid search, evaluate, and ablate.
//!
//! Data layout along the series (all cuts chronological):
//!
//! ```text
//! |---------------- train (split_fraction) ----------------|---- test ----|
//! |----- base slice (75%) -----|------ meta slice (25%) ----|
//! ```
//!
//! * Base models fit on windows whose targets lie entirely in the base
//!   slice.
//! * Meta regressors fit on base predictions for windows whose targets lie
//!   entirely in the meta slice (out-of-sample for the bases); the last 20%
//!   of those windows are held out as grid-search validation.
//! * Test windows are those whose targets lie entirely in the test slice;
//!   their inputs may reach back across the boundary, exactly as a real
//!   forecast consumes the latest observed history.
//!
//! Normalization extrema are fit on the train slice only, and no test-slice
//! consumption value ever enters any fit.

use crate::ensemble::{
    grid_search_meta, stacking_predictions, train_bases_with_epochs, EnsembleModel, GridScores,
    MetaCandidate, StackedPredictions,
};
use crate::error::{Error, Result};
use crate::eval::{horizon_report, AblationReport, AblationRow, AblationVariant, HorizonReport, Units};
use crate::features::{build_feature_frame, EncodingConfig};
use crate::series::{chronological_split, fit_minmax, normalize, DailySeries, NormalizationParams};
use crate::window::{make_windows, WindowedDataset, HORIZON, INPUT_LEN};

/// Fraction of the train slice given to the base models; the rest feeds the
/// meta regressors.
pub const BASE_FRACTION: f64 = 0.75;
/// Fraction of the meta windows held out as grid-search validation.
pub const GRID_VAL_FRACTION: f64 = 0.2;

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Chronological train share of the series (default 0.8).
    pub split_fraction: f64,
    /// Sliding-window input length in days (default 120).
    pub input_len: usize,
    /// Forecast horizon in days; the fixed architectures serve exactly 7.
    pub horizon: usize,
    pub encoding: EncodingConfig,
    /// Base-model epoch budget (standard recipe: 80).
    pub base_epochs: usize,
    /// Meta-regressor hyperparameter grid.
    pub grid: Vec<MetaCandidate>,
    /// Retrain the bases on the whole train slice after the metas are fit.
    /// Off by default: the shipped bases are then exactly the ones whose
    /// out-of-sample predictions the metas were fit on.
    pub refit_bases: bool,
    /// Master seed; every RNG stream in the run derives from it.
    pub seed: u64,
}

impl PipelineConfig {
    /// The standard full-scale recipe with the complete 400-candidate grid.
    pub fn standard(seed: u64) -> PipelineConfig {
        PipelineConfig {
            split_fraction: 0.8,
            input_len: INPUT_LEN,
            horizon: HORIZON,
            encoding: EncodingConfig::full(),
            base_epochs: crate::ensemble::BASE_EPOCHS,
            grid: crate::ensemble::full_grid(),
            refit_bases: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if self.horizon != HORIZON {
            return Err(Error::InvalidConfig(format!(
                "the fixed model heads forecast exactly {HORIZON} days, got horizon {}",
                self.horizon
            )));
        }
        if self.input_len < 5 {
            return Err(Error::InvalidConfig(format!(
                "input_len {} too short for the convolutional stack",
                self.input_len
            )));
        }
        if self.base_epochs == 0 {
            return Err(Error::InvalidConfig("base_epochs must be positive".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("empty meta candidate grid".into()));
        }
        self.encoding.validate()
    }
}

/// The windowed slices of one run, all cut from a single feature frame.
#[derive(Debug, Clone)]
pub struct SplitDatasets {
    pub norm: NormalizationParams,
    /// Days in the train slice.
    pub train_len: usize,
    /// Days in the base sub-slice of the train slice.
    pub base_len: usize,
    /// Windows whose targets lie in the base slice.
    pub base_train: WindowedDataset,
    /// Meta-fit windows: targets in the meta slice, minus the validation tail.
    pub meta_fit: WindowedDataset,
    /// Grid-search validation tail of the meta windows.
    pub grid_val: WindowedDataset,
    /// Windows whose targets lie in the test slice.
    pub test: WindowedDataset,
    /// All windows whose targets lie in the train slice (for optional base
    /// refits).
    pub train_all: WindowedDataset,
}

/// Normalizes, encodes, windows, and slices a raw daily series as drawn in
/// the module diagram.
pub fn build_datasets(series: &DailySeries, cfg: &PipelineConfig) -> Result<SplitDatasets> {
    cfg.validate()?;
    let (train_series, _) = chronological_split(series, cfg.split_fraction)?;
    let train_len = train_series.len();
    let norm = fit_minmax(&train_series)?;
    let normalized = normalize(series, &norm)?;
    let frame = build_feature_frame(&normalized, &cfg.encoding)?;
    let all = make_windows(&frame, cfg.input_len, cfg.horizon)?;

    let window_span = cfg.input_len + cfg.horizon;
    let base_len = (train_len as f64 * BASE_FRACTION).floor() as usize;
    if base_len < window_span {
        return Err(Error::InsufficientData(format!(
            "base slice holds {base_len} days but one window needs {window_span}; \
             supply a longer series"
        )));
    }
    let base_end = base_len - window_span + 1;
    if train_len < window_span {
        return Err(Error::InsufficientData(format!(
            "train slice holds {train_len} days but one window needs {window_span}"
        )));
    }
    let meta_start = base_len - cfg.input_len;
    let meta_end = train_len - window_span + 1;
    let n_meta = meta_end.saturating_sub(meta_start);
    if n_meta < 2 {
        return Err(Error::InsufficientData(format!(
            "meta slice yields {n_meta} windows; at least 2 are needed to fit \
             and validate the meta regressors"
        )));
    }
    let n_val = ((n_meta as f64 * GRID_VAL_FRACTION).floor() as usize).max(1);
    let val_start = meta_end - n_val;
    let test_start = train_len - cfg.input_len;
    if test_start >= all.n_windows() {
        return Err(Error::InsufficientData(format!(
            "test slice holds {} days but one window needs {window_span}",
            series.len() - train_len
        )));
    }

    Ok(SplitDatasets {
        norm,
        train_len,
        base_len,
        base_train: all.slice(0, base_end),
        meta_fit: all.slice(meta_start, val_start),
        grid_val: all.slice(val_start, meta_end),
        test: all.slice(test_start, all.n_windows()),
        train_all: all.slice(0, meta_end),
    })
}

/// Test windows of a raw series under an already-fitted normalization:
/// the windows whose targets lie entirely in the held-out tail, encoded and
/// scaled exactly as the model that is about to be scored expects.
pub fn test_windows(
    series: &DailySeries,
    split_fraction: f64,
    norm: &NormalizationParams,
    encoding: &EncodingConfig,
    input_len: usize,
    horizon: usize,
) -> Result<WindowedDataset> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {split_fraction}"
        )));
    }
    let train_len = (series.len() as f64 * split_fraction).floor() as usize;
    let normalized = normalize(series, norm)?;
    let frame = build_feature_frame(&normalized, encoding)?;
    let all = make_windows(&frame, input_len, horizon)?;
    let test_start = train_len.saturating_sub(input_len);
    if train_len < input_len || test_start >= all.n_windows() {
        return Err(Error::InsufficientData(format!(
            "series of {} days leaves no complete test window after a {train_len}-day train slice",
            series.len()
        )));
    }
    Ok(all.slice(test_start, all.n_windows()))
}

/// A trained ensemble plus the diagnostics of the run that produced it.
#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub model: EnsembleModel,
    pub lstm_history: Vec<f64>,
    pub cnn_history: Vec<f64>,
    /// Per-day candidate validation scores, aligned with the grid order.
    pub grid_scores: Vec<GridScores>,
    pub datasets: SplitDatasets,
}

/// Builds the per-day `(lstm, cnn) -> target` pairs for one horizon day
/// (1-based) from stacked base predictions.
pub fn meta_day_dataset(
    stacked: &StackedPredictions,
    windows: &WindowedDataset,
    day: usize,
) -> Result<WindowedDataset> {
    if day == 0 || day > windows.horizon {
        return Err(Error::InvalidConfig(format!(
            "day {day} outside 1..={}",
            windows.horizon
        )));
    }
    if stacked.n_windows() != windows.n_windows() {
        return Err(Error::LengthMismatch {
            left: stacked.n_windows(),
            right: windows.n_windows(),
        });
    }
    let n = windows.n_windows();
    let mut inputs = Vec::with_capacity(2 * n);
    let mut targets = Vec::with_capacity(n);
    let mut dates = Vec::with_capacity(n);
    for w in 0..n {
        inputs.extend_from_slice(&stacked.pair(w, day - 1));
        targets.push(windows.target(w)[day - 1]);
        dates.push(windows.target_start_dates[w] + chrono::Duration::days(day as i64 - 1));
    }
    Ok(WindowedDataset {
        input_len: 1,
        horizon: 1,
        feature_count: 2,
        inputs,
        targets,
        target_start_dates: dates,
    })
}

/// Runs the whole training workflow on a raw daily series.
pub fn train_pipeline(series: &DailySeries, cfg: &PipelineConfig) -> Result<TrainedPipeline> {
    let datasets = build_datasets(series, cfg)?;
    let bases = train_bases_with_epochs(&datasets.base_train, cfg.seed, cfg.base_epochs)?;
    let stacked_fit = stacking_predictions(&bases.lstm, &bases.cnn, &datasets.meta_fit)?;
    let stacked_val = stacking_predictions(&bases.lstm, &bases.cnn, &datasets.grid_val)?;

    let mut metas = Vec::with_capacity(cfg.horizon);
    let mut grid_scores = Vec::with_capacity(cfg.horizon);
    for day in 1..=cfg.horizon {
        let fit = meta_day_dataset(&stacked_fit, &datasets.meta_fit, day)?;
        let val = meta_day_dataset(&stacked_val, &datasets.grid_val, day)?;
        let (meta, scores) = grid_search_meta(day, &fit, &val, &cfg.grid, cfg.seed)?;
        metas.push(meta);
        grid_scores.push(scores);
    }

    let (lstm, cnn, lstm_history, cnn_history) = if cfg.refit_bases {
        let refit = train_bases_with_epochs(&datasets.train_all, cfg.seed, cfg.base_epochs)?;
        (refit.lstm, refit.cnn, refit.lstm_history, refit.cnn_history)
    } else {
        (bases.lstm, bases.cnn, bases.lstm_history, bases.cnn_history)
    };

    let model = EnsembleModel {
        lstm,
        cnn,
        metas,
        norm: datasets.norm,
        encoding: cfg.encoding.clone(),
        input_len: cfg.input_len,
        horizon: cfg.horizon,
        master_seed: cfg.seed,
    };
    Ok(TrainedPipeline {
        model,
        lstm_history,
        cnn_history,
        grid_scores,
        datasets,
    })
}

/// Scores the two bases and the fused ensemble over the test windows.
/// Reports come back in the order `[lstm, cnn, mc]`.
pub fn evaluate_models(tp: &TrainedPipeline, units: Units) -> Result<Vec<HorizonReport>> {
    let test = &tp.datasets.test;
    let model = &tp.model;
    let mut reports = vec![
        horizon_report("lstm", |w| model.lstm.predict(w), test, Units::Normalized)?,
        horizon_report("cnn", |w| model.cnn.predict(w), test, Units::Normalized)?,
        horizon_report("mc", |w| model.predict_normalized(w), test, Units::Normalized)?,
    ];
    if units == Units::Mw {
        reports = reports
            .iter()
            .map(|r| r.to_mw(&model.norm))
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(reports)
}

/// Trains the full pipeline once per variant — same series, same master
/// seed, same splits, only the encoding differs — and tabulates the fused
/// model's Day-1 and 7-day-average errors. Variants are independent of each
/// other; they run sequentially here because each already saturates the
/// worker pool during its own grid search.
pub fn run_ablation(
    series: &DailySeries,
    variants: &[AblationVariant],
    cfg: &PipelineConfig,
) -> Result<AblationReport> {
    if variants.is_empty() {
        return Err(Error::InvalidConfig("no ablation variants requested".into()));
    }
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let mut vcfg = cfg.clone();
        vcfg.encoding = variant.encoding();
        let tp = train_pipeline(series, &vcfg)?;
        let mc = evaluate_models(&tp, Units::Normalized)?
            .into_iter()
            .nth(2)
            .expect("evaluate_models returns three reports");
        rows.push(AblationRow {
            variant,
            day1: mc.per_day[0],
            avg: mc.avg,
        });
    }
    Ok(AblationReport {
        seed: cfg.seed,
        units: Units::Normalized,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::small_grid;
    use crate::synth::{generate, SynthConfig};

    /// Reduced geometry that exercises every pipeline stage in well under a
    /// second: short windows, few epochs, two-candidate grid.
    fn quick_config(seed: u64) -> PipelineConfig {
        let grid = small_grid();
        PipelineConfig {
            split_fraction: 0.8,
            input_len: 40,
            horizon: 7,
            encoding: EncodingConfig::full(),
            base_epochs: 2,
            grid: vec![grid[0], grid[4]],
            refit_bases: false,
            seed,
        }
    }

    fn quick_series(days: usize) -> DailySeries {
        generate(&SynthConfig {
            days,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn split_geometry_is_chronological_and_exhaustive() {
        let series = quick_series(365);
        let cfg = PipelineConfig {
            input_len: 120,
            ..quick_config(5)
        };
        let ds = build_datasets(&series, &cfg).unwrap();
        assert_eq!(ds.train_len, 292);
        assert_eq!(ds.base_len, 219);
        // Window counts follow directly from the slice arithmetic.
        assert_eq!(ds.base_train.n_windows(), 219 - 127 + 1);
        let n_meta = (292 - 127 + 1) - (219 - 120);
        let n_val = n_meta / 5;
        assert_eq!(ds.grid_val.n_windows(), n_val);
        assert_eq!(ds.meta_fit.n_windows(), n_meta - n_val);
        assert_eq!(ds.test.n_windows(), (365 - 127 + 1) - (292 - 120));
        // Every window whose targets stay inside the train slice: the base
        // windows, the boundary-straddling windows excluded from both fits,
        // and the meta windows.
        assert_eq!(ds.train_all.n_windows(), 292 - 127 + 1);

        // Target placement: base targets end inside the base slice, meta
        // targets start after it, test targets start after the train slice.
        let dates = series.dates();
        let first_meta_day = dates[ds.base_len];
        let first_test_day = dates[ds.train_len];
        for w in 0..ds.base_train.n_windows() {
            let last_target = ds.base_train.target_start_dates[w]
                + chrono::Duration::days(cfg.horizon as i64 - 1);
            assert!(last_target < first_meta_day);
        }
        for w in 0..ds.meta_fit.n_windows() {
            assert!(ds.meta_fit.target_start_dates[w] >= first_meta_day);
            let last_target = ds.meta_fit.target_start_dates[w]
                + chrono::Duration::days(cfg.horizon as i64 - 1);
            assert!(last_target < first_test_day);
        }
        for w in 0..ds.grid_val.n_windows() {
            assert!(ds.grid_val.target_start_dates[w] > ds.meta_fit.target_start_dates.last().copied().unwrap());
        }
        for w in 0..ds.test.n_windows() {
            assert!(ds.test.target_start_dates[w] >= first_test_day);
        }
    }

    #[test]
    fn too_short_series_reports_the_shortfall() {
        let series = quick_series(150);
        let cfg = PipelineConfig {
            input_len: 120,
            ..quick_config(5)
        };
        let err = build_datasets(&series, &cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)), "got {err:?}");
    }

    #[test]
    fn pipeline_trains_seven_metas_and_predicts() {
        let series = quick_series(240);
        let tp = train_pipeline(&series, &quick_config(9)).unwrap();
        assert_eq!(tp.model.metas.len(), 7);
        for (i, meta) in tp.model.metas.iter().enumerate() {
            assert_eq!(meta.day_index, i + 1);
            meta.chosen.validate().unwrap();
            assert!(meta.validation_score.is_finite());
        }
        assert_eq!(tp.grid_scores.len(), 7);
        let window = tp.datasets.test.input(0);
        let forecast = tp.model.predict_normalized(window).unwrap();
        assert_eq!(forecast.len(), 7);
        assert!(forecast.iter().all(|v| v.is_finite()));
        let mw = tp.model.predict_mw(window).unwrap();
        for (n, m) in forecast.iter().zip(&mw) {
            assert!((tp.model.norm.invert(*n) - m).abs() < 1e-9);
        }
    }

    #[test]
    fn pipeline_is_deterministic_in_the_master_seed() {
        let series = quick_series(240);
        let mut a = train_pipeline(&series, &quick_config(4)).unwrap();
        let mut b = train_pipeline(&series, &quick_config(4)).unwrap();
        assert_eq!(a.model.lstm.params_flat(), b.model.lstm.params_flat());
        assert_eq!(a.model.cnn.params_flat(), b.model.cnn.params_flat());
        for (ma, mb) in a.model.metas.iter_mut().zip(b.model.metas.iter_mut()) {
            assert_eq!(ma.chosen, mb.chosen);
            assert_eq!(ma.model.params_flat(), mb.model.params_flat());
        }
        assert_eq!(a.grid_scores, b.grid_scores);
    }

    #[test]
    fn test_slice_targets_never_influence_training() {
        // Poison every test-slice consumption value with an absurd sentinel;
        // every trained parameter must stay bit-identical.
        let clean = quick_series(240);
        let cfg = quick_config(13);
        let train_len = (240.0 * cfg.split_fraction).floor() as usize;
        let mut records = clean.records().to_vec();
        for r in records.iter_mut().skip(train_len) {
            r.consumption = 9.9e9;
        }
        let poisoned =
            DailySeries::new(records, crate::series::Scale::Raw).unwrap();

        let mut tp_clean = train_pipeline(&clean, &cfg).unwrap();
        let mut tp_poisoned = train_pipeline(&poisoned, &cfg).unwrap();
        assert_eq!(
            tp_clean.model.lstm.params_flat(),
            tp_poisoned.model.lstm.params_flat()
        );
        assert_eq!(
            tp_clean.model.cnn.params_flat(),
            tp_poisoned.model.cnn.params_flat()
        );
        for (a, b) in tp_clean
            .model
            .metas
            .iter_mut()
            .zip(tp_poisoned.model.metas.iter_mut())
        {
            assert_eq!(a.chosen, b.chosen);
            assert_eq!(a.model.params_flat(), b.model.params_flat());
        }
    }

    #[test]
    fn evaluation_reports_three_models_with_sane_metrics() {
        let series = quick_series(240);
        let tp = train_pipeline(&series, &quick_config(21)).unwrap();
        let reports = evaluate_models(&tp, Units::Normalized).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[0].model_name, "lstm");
        assert_eq!(reports[1].model_name, "cnn");
        assert_eq!(reports[2].model_name, "mc");
        for r in &reports {
            assert_eq!(r.per_day.len(), 7);
            for m in &r.per_day {
                assert!(m.rmse >= m.mae && m.mae >= 0.0);
            }
        }
        let mw = evaluate_models(&tp, Units::Mw).unwrap();
        let range = tp.model.norm.range();
        for (n, m) in reports.iter().zip(&mw) {
            assert!((n.avg.mae * range - m.avg.mae).abs() < 1e-9);
        }
    }

    #[test]
    fn ablation_rows_follow_variant_order_and_seed() {
        let series = quick_series(240);
        let variants = [AblationVariant::Full, AblationVariant::RawIndices];
        let report = run_ablation(&series, &variants, &quick_config(30)).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].variant, AblationVariant::Full);
        assert_eq!(report.rows[1].variant, AblationVariant::RawIndices);
        assert_eq!(report.seed, 30);
        for row in &report.rows {
            assert!(row.day1.rmse >= row.day1.mae);
            assert!(row.avg.rmse >= row.avg.mae);
        }
    }
}
