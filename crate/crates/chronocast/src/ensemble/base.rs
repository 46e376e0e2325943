//! The two first-stage forecasters and their fixed training recipes.

use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::error::{Error, Result};
use crate::nn::{
    train, Activation, Layer, LayerSpec, LrSchedule, Network, OptimizerKind, Shape, TrainConfig,
};
use crate::window::WindowedDataset;

/// Horizon produced by both base stacks.
pub const BASE_HORIZON: usize = 7;
/// Epoch count shared by both base models.
pub const BASE_EPOCHS: usize = 80;
/// Mini-batch size shared by both base models.
pub const BASE_BATCH: usize = 32;

/// Seed-stream tags keeping every derived RNG stream disjoint.
const TAG_INIT: u64 = 0x11;
const TAG_SHUFFLE: u64 = 0x22;

/// The two fixed base architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseModelKind {
    LstmBase,
    CnnBase,
}

impl BaseModelKind {
    pub const ALL: [BaseModelKind; 2] = [BaseModelKind::LstmBase, BaseModelKind::CnnBase];

    pub fn name(self) -> &'static str {
        match self {
            BaseModelKind::LstmBase => "lstm",
            BaseModelKind::CnnBase => "cnn",
        }
    }

    pub fn learning_rate(self) -> f64 {
        match self {
            BaseModelKind::LstmBase => 1e-4,
            BaseModelKind::CnnBase => 1e-3,
        }
    }

    pub fn dropout_rate(self) -> f64 {
        match self {
            BaseModelKind::LstmBase => 0.2,
            BaseModelKind::CnnBase => 0.3,
        }
    }

    fn seed_tag(self) -> u64 {
        match self {
            BaseModelKind::LstmBase => 1,
            BaseModelKind::CnnBase => 2,
        }
    }

    /// Layer stack consuming `(input_len, feature_count)` sequences.
    pub fn specs(self, feature_count: usize) -> Vec<LayerSpec> {
        match self {
            BaseModelKind::LstmBase => vec![
                LayerSpec::Lstm {
                    input_dim: feature_count,
                    hidden_units: 64,
                    return_last_state: true,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Dense {
                    in_dim: 64,
                    out_dim: 32,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Dense {
                    in_dim: 32,
                    out_dim: BASE_HORIZON,
                    activation: Activation::Linear,
                },
            ],
            BaseModelKind::CnnBase => vec![
                LayerSpec::Conv1d {
                    in_channels: feature_count,
                    filters: 128,
                    kernel_size: 3,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.3 },
                LayerSpec::Conv1d {
                    in_channels: 128,
                    filters: 32,
                    kernel_size: 3,
                    activation: Activation::Relu,
                },
                LayerSpec::GlobalAvgPool { channels: 32 },
                LayerSpec::Dense {
                    in_dim: 32,
                    out_dim: 16,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.3 },
                LayerSpec::Dense {
                    in_dim: 16,
                    out_dim: BASE_HORIZON,
                    activation: Activation::Linear,
                },
            ],
        }
    }

    pub fn train_config(self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: BASE_EPOCHS,
            batch_size: BASE_BATCH,
            learning_rate: self.learning_rate(),
            shuffle_seed,
            optimizer: OptimizerKind::Adam,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

/// Builds an untrained base network for the given window geometry. The
/// forecasting head's bias starts at 0.5, the midpoint of the normalized
/// target range, so the short fixed training budget is spent on shape, not
/// on finding the mean.
pub fn build_base(
    kind: BaseModelKind,
    input_len: usize,
    feature_count: usize,
    seed: u64,
) -> Result<Network> {
    if feature_count == 0 {
        return Err(Error::InvalidConfig("feature_count must be positive".into()));
    }
    if input_len < 5 {
        return Err(Error::InvalidConfig(format!(
            "input_len {input_len} too short for the convolutional stack"
        )));
    }
    let shape = Shape::Seq {
        len: input_len,
        channels: feature_count,
    };
    let mut net = Network::from_specs(shape, &kind.specs(feature_count), seed)?;
    if let Some(Layer::Dense(head)) = net.layers.last_mut() {
        head.set_bias_constant(0.5);
    }
    Ok(net)
}

/// Both trained base models plus their loss histories.
#[derive(Debug, Clone)]
pub struct TrainedBases {
    pub lstm: Network,
    pub cnn: Network,
    pub lstm_history: Vec<f64>,
    pub cnn_history: Vec<f64>,
}

/// Trains both bases on the same windows, each with its own learning rate
/// and dropout, Adam, 80 epochs, batch 32. The two trainings are
/// independent (seed streams derived from `master_seed`) and run in
/// parallel; results are identical to serial execution.
pub fn train_bases(data: &WindowedDataset, master_seed: u64) -> Result<TrainedBases> {
    train_bases_with_epochs(data, master_seed, BASE_EPOCHS)
}

/// [`train_bases`] with an explicit epoch budget. The standard recipe is 80
/// epochs; shorter budgets exist for quick smoke runs and keep everything
/// else (optimizer, rates, batching, seed streams) identical.
pub fn train_bases_with_epochs(
    data: &WindowedDataset,
    master_seed: u64,
    epochs: usize,
) -> Result<TrainedBases> {
    if data.n_windows() == 0 {
        return Err(Error::InsufficientData("no base-training windows".into()));
    }
    let train_one = |kind: BaseModelKind| -> Result<(Network, Vec<f64>)> {
        let init_seed = derive_seed(master_seed, &[kind.seed_tag(), TAG_INIT]);
        let shuffle_seed = derive_seed(master_seed, &[kind.seed_tag(), TAG_SHUFFLE]);
        let mut net = build_base(kind, data.input_len, data.feature_count, init_seed)?;
        let mut config = kind.train_config(shuffle_seed);
        config.epochs = epochs;
        let history = train(&mut net, data, &config)?;
        Ok((net, history))
    };
    let (lstm_result, cnn_result) = rayon::join(
        || train_one(BaseModelKind::LstmBase),
        || train_one(BaseModelKind::CnnBase),
    );
    let (lstm, lstm_history) = lstm_result?;
    let (cnn, cnn_history) = cnn_result?;
    Ok(TrainedBases {
        lstm,
        cnn,
        lstm_history,
        cnn_history,
    })
}

/// Eval-mode 7-day predictions from both bases for every window, stored
/// row-major as `n_windows x horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPredictions {
    pub horizon: usize,
    pub lstm: Vec<f64>,
    pub cnn: Vec<f64>,
}

impl StackedPredictions {
    pub fn n_windows(&self) -> usize {
        self.lstm.len() / self.horizon
    }

    /// The `(lstm, cnn)` prediction pair routed to the day-`d` meta
    /// regressor (0-based day).
    pub fn pair(&self, window: usize, day: usize) -> [f64; 2] {
        [
            self.lstm[window * self.horizon + day],
            self.cnn[window * self.horizon + day],
        ]
    }
}

/// Runs both trained bases in evaluation mode over a dataset.
pub fn stacking_predictions(
    lstm: &Network,
    cnn: &Network,
    data: &WindowedDataset,
) -> Result<StackedPredictions> {
    let n = data.n_windows();
    let horizon = data.horizon;
    let mut lstm_preds = Vec::with_capacity(n * horizon);
    let mut cnn_preds = Vec::with_capacity(n * horizon);
    for w in 0..n {
        let input = data.input(w);
        let lp = lstm.predict(input)?;
        let cp = cnn.predict(input)?;
        if lp.len() != horizon || cp.len() != horizon {
            return Err(Error::ShapeMismatch(format!(
                "base outputs ({}, {}) do not match horizon {horizon}",
                lp.len(),
                cp.len()
            )));
        }
        lstm_preds.extend(lp);
        cnn_preds.extend(cp);
    }
    Ok(StackedPredictions {
        horizon,
        lstm: lstm_preds,
        cnn: cnn_preds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_feature_frame, EncodingConfig};
    use crate::series::{normalize, fit_minmax};
    use crate::synth::{generate, SynthConfig};
    use crate::window::{make_windows, HORIZON, INPUT_LEN};

    fn small_dataset() -> WindowedDataset {
        let series = generate(&SynthConfig {
            days: 140,
            ..SynthConfig::default()
        })
        .unwrap();
        let params = fit_minmax(&series).unwrap();
        let normalized = normalize(&series, &params).unwrap();
        let frame = build_feature_frame(&normalized, &EncodingConfig::full()).unwrap();
        make_windows(&frame, INPUT_LEN, HORIZON).unwrap()
    }

    #[test]
    fn lstm_base_output_dim_is_seven() {
        let net = build_base(BaseModelKind::LstmBase, INPUT_LEN, 6, 1).unwrap();
        assert_eq!(net.out_dim(), 7);
    }

    #[test]
    fn lstm_base_shape_chain() {
        let net = build_base(BaseModelKind::LstmBase, INPUT_LEN, 6, 1).unwrap();
        let dims: Vec<usize> = net.shape_chain().iter().map(Shape::size).collect();
        assert_eq!(dims, vec![120 * 6, 64, 64, 32, 32, 7]);
    }

    #[test]
    fn cnn_base_shape_chain() {
        let net = build_base(BaseModelKind::CnnBase, INPUT_LEN, 6, 1).unwrap();
        let chain = net.shape_chain().to_vec();
        assert_eq!(
            chain,
            vec![
                Shape::Seq { len: 120, channels: 6 },
                Shape::Seq { len: 118, channels: 128 },
                Shape::Seq { len: 118, channels: 128 },
                Shape::Seq { len: 116, channels: 32 },
                Shape::Vector(32),
                Shape::Vector(16),
                Shape::Vector(16),
                Shape::Vector(7),
            ]
        );
    }

    #[test]
    fn cnn_base_layer_widths() {
        let net = build_base(BaseModelKind::CnnBase, INPUT_LEN, 6, 1).unwrap();
        let widths: Vec<usize> = net
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv1d(c) => Some(c.filters),
                Layer::Dense(d) => Some(d.out_dim),
                _ => None,
            })
            .collect();
        assert_eq!(widths, vec![128, 32, 16, 7]);
    }

    #[test]
    fn head_bias_starts_at_midpoint() {
        let mut net = build_base(BaseModelKind::LstmBase, INPUT_LEN, 6, 1).unwrap();
        let params = net.params_flat();
        let bias = &params[params.len() - 7..];
        assert!(bias.iter().all(|&b| b == 0.5));
    }

    #[test]
    fn build_rejects_degenerate_geometry() {
        assert!(build_base(BaseModelKind::CnnBase, 4, 6, 1).is_err());
        assert!(build_base(BaseModelKind::LstmBase, 120, 0, 1).is_err());
    }

    #[test]
    fn stacking_outputs_are_deterministic_and_shaped() {
        let data = small_dataset();
        let lstm = build_base(BaseModelKind::LstmBase, INPUT_LEN, 6, 3).unwrap();
        let cnn = build_base(BaseModelKind::CnnBase, INPUT_LEN, 6, 4).unwrap();
        let a = stacking_predictions(&lstm, &cnn, &data).unwrap();
        let b = stacking_predictions(&lstm, &cnn, &data).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_windows(), data.n_windows());
        assert_eq!(a.lstm.len(), data.n_windows() * 7);
        let pair = a.pair(0, 3);
        assert_eq!(pair[0], a.lstm[3]);
        assert_eq!(pair[1], a.cnn[3]);
    }
}
