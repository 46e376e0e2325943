//! Two-stage stacked ensemble: LSTM and CNN bases fused per horizon day by
//! grid-searched MLP meta regressors.

pub mod base;
pub mod grid;

pub use base::{
    build_base, stacking_predictions, train_bases, train_bases_with_epochs, BaseModelKind,
    StackedPredictions, TrainedBases, BASE_BATCH, BASE_EPOCHS, BASE_HORIZON,
};
pub use grid::{
    full_grid, grid_search_meta, small_grid, GridScores, MetaCandidate, MetaRegressor,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EncodingConfig;
use crate::nn::{LayerSpec, Network, Shape, Tensor2};
use crate::series::NormalizationParams;

/// Splitmix-style avalanche mix.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a tag path, so every model,
/// shuffle, and grid candidate owns a disjoint deterministic RNG stream.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix(master);
    for &tag in tags {
        state = mix(state ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    state
}

/// The full trained forecasting model.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub lstm: Network,
    pub cnn: Network,
    /// One regressor per horizon day, day 1 first.
    pub metas: Vec<MetaRegressor>,
    pub norm: NormalizationParams,
    pub encoding: EncodingConfig,
    pub input_len: usize,
    pub horizon: usize,
    pub master_seed: u64,
}

impl EnsembleModel {
    fn check_window(&self, window: &[f64]) -> Result<()> {
        let expected = self.input_len * self.encoding.feature_count();
        if window.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "window length {} does not match {} x {} features",
                window.len(),
                self.input_len,
                self.encoding.feature_count()
            )));
        }
        Ok(())
    }

    /// Both bases' eval-mode 7-day predictions for one window.
    pub fn base_predictions(&self, window: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_window(window)?;
        Ok((self.lstm.predict(window)?, self.cnn.predict(window)?))
    }

    /// Fused normalized 7-day forecast: day `d` comes from meta `d` applied
    /// to the pair of base predictions for day `d`.
    pub fn predict_normalized(&self, window: &[f64]) -> Result<Vec<f64>> {
        let (lstm_pred, cnn_pred) = self.base_predictions(window)?;
        if self.metas.len() != self.horizon {
            return Err(Error::InvalidConfig(format!(
                "{} meta regressors for horizon {}",
                self.metas.len(),
                self.horizon
            )));
        }
        let mut out = Vec::with_capacity(self.horizon);
        for (day, meta) in self.metas.iter().enumerate() {
            out.push(meta.predict_pair([lstm_pred[day], cnn_pred[day]])?);
        }
        Ok(out)
    }

    /// Forecast in megawatts (inverse of the min-max normalization).
    pub fn predict_mw(&self, window: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .predict_normalized(window)?
            .into_iter()
            .map(|v| self.norm.invert(v))
            .collect())
    }

    pub fn to_bundle(&mut self) -> EnsembleBundle {
        EnsembleBundle {
            version: BUNDLE_VERSION,
            master_seed: self.master_seed,
            input_len: self.input_len,
            horizon: self.horizon,
            encoding: self.encoding.clone(),
            norm: self.norm,
            lstm: NetworkCheckpoint::capture(&mut self.lstm),
            cnn: NetworkCheckpoint::capture(&mut self.cnn),
            metas: self
                .metas
                .iter_mut()
                .map(|m| MetaCheckpoint {
                    day_index: m.day_index,
                    chosen: m.chosen,
                    validation_score: m.validation_score,
                    model: NetworkCheckpoint::capture(&mut m.model),
                })
                .collect(),
        }
    }

    pub fn from_bundle(bundle: &EnsembleBundle) -> Result<Self> {
        if bundle.version != BUNDLE_VERSION {
            return Err(Error::InvalidCheckpoint(format!(
                "bundle version {} unsupported (expected {BUNDLE_VERSION})",
                bundle.version
            )));
        }
        bundle.encoding.validate()?;
        if bundle.metas.len() != bundle.horizon {
            return Err(Error::InvalidCheckpoint(format!(
                "{} meta checkpoints for horizon {}",
                bundle.metas.len(),
                bundle.horizon
            )));
        }
        let metas = bundle
            .metas
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if m.day_index != i + 1 {
                    return Err(Error::InvalidCheckpoint(format!(
                        "meta checkpoint {i} claims day {}",
                        m.day_index
                    )));
                }
                m.chosen.validate()?;
                Ok(MetaRegressor {
                    day_index: m.day_index,
                    model: m.model.restore()?,
                    chosen: m.chosen,
                    validation_score: m.validation_score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleModel {
            lstm: bundle.lstm.restore()?,
            cnn: bundle.cnn.restore()?,
            metas,
            norm: bundle.norm,
            encoding: bundle.encoding.clone(),
            input_len: bundle.input_len,
            horizon: bundle.horizon,
            master_seed: bundle.master_seed,
        })
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        let bundle = self.to_bundle();
        let json = serde_json::to_string_pretty(&bundle)?;
        std::fs::write(path, json).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let bundle: EnsembleBundle = serde_json::from_str(&json)?;
        Self::from_bundle(&bundle)
    }
}

pub const BUNDLE_VERSION: u32 = 1;

/// Serializable snapshot of one network: architecture, seed, parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub in_shape: Shape,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    pub params: Vec<Tensor2>,
}

impl NetworkCheckpoint {
    pub fn capture(net: &mut Network) -> Self {
        NetworkCheckpoint {
            in_shape: net.in_shape,
            layers: net.specs(),
            seed: net.seed(),
            params: net.param_tensors(),
        }
    }

    pub fn restore(&self) -> Result<Network> {
        let mut net = Network::from_specs(self.in_shape, &self.layers, self.seed)?;
        net.load_param_tensors(&self.params)?;
        Ok(net)
    }
}

/// One self-describing archive of the whole ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBundle {
    pub version: u32,
    pub master_seed: u64,
    pub input_len: usize,
    pub horizon: usize,
    pub encoding: EncodingConfig,
    pub norm: NormalizationParams,
    pub lstm: NetworkCheckpoint,
    pub cnn: NetworkCheckpoint,
    pub metas: Vec<MetaCheckpoint>,
}

/// Checkpoint of one per-day meta regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaCheckpoint {
    pub day_index: usize,
    pub chosen: MetaCandidate,
    pub validation_score: f64,
    pub model: NetworkCheckpoint,
}
