//! The 400-candidate MLP hyperparameter grid and its exhaustive search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::error::{Error, Result};
use crate::nn::{
    train_early_stopping, Activation, EarlyStopConfig, Layer, LayerSpec, LrSchedule, Network,
    OptimizerKind, Shape, TrainConfig,
};
use crate::window::WindowedDataset;

/// The ten hidden-layer triples, in table order (major key of the grid).
pub const HIDDEN_LAYER_CHOICES: [(usize, usize, usize); 10] = [
    (10, 8, 6),
    (10, 6, 6),
    (10, 6, 4),
    (8, 8, 4),
    (8, 8, 6),
    (8, 6, 4),
    (8, 6, 6),
    (6, 6, 6),
    (6, 6, 4),
    (6, 4, 4),
];

pub const ACTIVATION_CHOICES: [Activation; 2] = [Activation::Relu, Activation::Tanh];
pub const SOLVER_CHOICES: [OptimizerKind; 2] = [OptimizerKind::Adam, OptimizerKind::Sgd];
pub const LEARNING_RATE_CHOICES: [f64; 5] = [1e-4, 2e-4, 3e-4, 4e-4, 5e-4];
pub const LR_UPDATE_CHOICES: [LrSchedule; 2] = [LrSchedule::Adaptive, LrSchedule::Constant];

/// One hyperparameter combination for a per-day meta regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaCandidate {
    pub hidden_layers: (usize, usize, usize),
    pub activation: Activation,
    pub solver: OptimizerKind,
    pub learning_rate: f64,
    pub lr_update: LrSchedule,
}

impl MetaCandidate {
    /// Rejects combinations outside the enumerated grid.
    pub fn validate(&self) -> Result<()> {
        let ok = HIDDEN_LAYER_CHOICES.contains(&self.hidden_layers)
            && ACTIVATION_CHOICES.contains(&self.activation)
            && SOLVER_CHOICES.contains(&self.solver)
            && LEARNING_RATE_CHOICES
                .iter()
                .any(|&lr| lr == self.learning_rate)
            && LR_UPDATE_CHOICES.contains(&self.lr_update);
        if ok {
            Ok(())
        } else {
            Err(Error::GridSearch(format!("candidate outside grid: {self:?}")))
        }
    }

    /// MLP with two base predictions in and one fused prediction out.
    pub fn specs(&self) -> Vec<LayerSpec> {
        let (h1, h2, h3) = self.hidden_layers;
        vec![
            LayerSpec::Dense {
                in_dim: 2,
                out_dim: h1,
                activation: self.activation,
            },
            LayerSpec::Dense {
                in_dim: h1,
                out_dim: h2,
                activation: self.activation,
            },
            LayerSpec::Dense {
                in_dim: h2,
                out_dim: h3,
                activation: self.activation,
            },
            LayerSpec::Dense {
                in_dim: h3,
                out_dim: 1,
                activation: Activation::Linear,
            },
        ]
    }

    /// Builds the correction MLP. The scalar head starts all-zero so a
    /// fresh regressor computes exactly the pair mean (see
    /// [`MetaRegressor::predict_pair`]); the head picks up nonzero weights
    /// on the first optimizer step and the hidden layers train from there.
    pub fn build(&self, seed: u64) -> Result<Network> {
        let mut net = Network::from_specs(Shape::Vector(2), &self.specs(), seed)?;
        if let Some(Layer::Dense(head)) = net.layers.last_mut() {
            head.w.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(net)
    }

    pub fn train_config(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: usize::MAX,
            learning_rate: self.learning_rate,
            shuffle_seed,
            optimizer: self.solver,
            lr_schedule: self.lr_update,
        }
    }
}

impl std::fmt::Display for MetaCandidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (h1, h2, h3) = self.hidden_layers;
        let act = match self.activation {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        };
        let solver = match self.solver {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        };
        let update = match self.lr_update {
            LrSchedule::Adaptive => "adaptive",
            LrSchedule::Constant => "constant",
        };
        write!(
            f,
            "({h1},{h2},{h3})/{act}/{solver}/lr={}/{update}",
            self.learning_rate
        )
    }
}

/// The full 10x2x2x5x2 = 400-candidate grid. Enumeration order is the tie
/// break for equal validation scores: hidden layers are the major key, then
/// activation, solver, learning rate, and schedule.
pub fn full_grid() -> Vec<MetaCandidate> {
    let mut grid = Vec::with_capacity(400);
    for &hidden_layers in &HIDDEN_LAYER_CHOICES {
        for &activation in &ACTIVATION_CHOICES {
            for &solver in &SOLVER_CHOICES {
                for &learning_rate in &LEARNING_RATE_CHOICES {
                    for &lr_update in &LR_UPDATE_CHOICES {
                        grid.push(MetaCandidate {
                            hidden_layers,
                            activation,
                            solver,
                            learning_rate,
                            lr_update,
                        });
                    }
                }
            }
        }
    }
    grid
}

/// Eight-candidate subset for quick runs: extreme hidden sizes, relu, both
/// solvers, extreme learning rates, constant schedule.
pub fn small_grid() -> Vec<MetaCandidate> {
    let mut grid = Vec::with_capacity(8);
    for &hidden_layers in &[(10, 8, 6), (6, 4, 4)] {
        for &solver in &SOLVER_CHOICES {
            for &learning_rate in &[1e-4, 5e-4] {
                grid.push(MetaCandidate {
                    hidden_layers,
                    activation: Activation::Relu,
                    solver,
                    learning_rate,
                    lr_update: LrSchedule::Constant,
                });
            }
        }
    }
    grid
}

/// A trained per-day meta regressor and the candidate that produced it.
///
/// The regressor fuses the two base predictions as `mean(pair) + mlp(pair)`.
/// The MLP starts as the zero function (its output layer is zero-initialized),
/// so an untrained regressor is exactly the equal-weight average of the bases
/// and training refines that blend. This keeps the low grid learning rates
/// effective: they only have to learn a correction, not the full mapping from
/// scratch.
#[derive(Debug, Clone)]
pub struct MetaRegressor {
    /// Horizon day served by this regressor, 1-based.
    pub day_index: usize,
    /// Correction MLP; its output is added to the pair mean.
    pub model: Network,
    pub chosen: MetaCandidate,
    /// Validation MSE of the selected parameters.
    pub validation_score: f64,
}

impl MetaRegressor {
    /// Fused prediction for one `[lstm, cnn]` pair.
    pub fn predict_pair(&self, pair: [f64; 2]) -> Result<f64> {
        let correction = self.model.predict(&pair)?;
        Ok(0.5 * (pair[0] + pair[1]) + correction[0])
    }
}

/// Rewrites targets as deviations from the pair mean, so the MLP can be
/// trained directly on the correction it must learn. The MSE of the
/// correction against the residual target equals the MSE of the fused
/// prediction against the original target, so validation scores carry over
/// unchanged.
fn residual_targets(data: &WindowedDataset) -> Result<WindowedDataset> {
    if data.feature_count != 2 || data.input_len != 1 || data.horizon != 1 {
        return Err(Error::InsufficientData(format!(
            "meta datasets carry one (lstm, cnn) pair per window; got input_len {} x {} features, horizon {}",
            data.input_len, data.feature_count, data.horizon
        )));
    }
    let mut shifted = data.clone();
    for w in 0..data.n_windows() {
        let pair = data.input(w);
        shifted.targets[w] = data.target(w)[0] - 0.5 * (pair[0] + pair[1]);
    }
    Ok(shifted)
}

/// Validation scores of every candidate, aligned with the grid order;
/// diverged candidates hold `None`.
pub type GridScores = Vec<Option<f64>>;

/// Trains one MLP per candidate on `(lstm, cnn) -> target` pairs for the
/// given day and returns the candidate with minimal validation MSE (grid
/// order breaks ties). Candidates run in parallel; each derives its private
/// RNG streams from `(master_seed, day, candidate index)`, so the winner is
/// independent of thread count.
pub fn grid_search_meta(
    day_index: usize,
    meta_train: &WindowedDataset,
    meta_val: &WindowedDataset,
    grid: &[MetaCandidate],
    master_seed: u64,
) -> Result<(MetaRegressor, GridScores)> {
    if !(1..=7).contains(&day_index) {
        return Err(Error::InvalidConfig(format!(
            "day_index {day_index} outside 1..=7"
        )));
    }
    if grid.is_empty() {
        return Err(Error::GridSearch("empty candidate grid".into()));
    }
    if meta_train.n_windows() == 0 || meta_val.n_windows() == 0 {
        return Err(Error::InsufficientData(
            "empty meta-training or validation slice".into(),
        ));
    }
    for candidate in grid {
        candidate.validate()?;
    }
    let stop = EarlyStopConfig::default();
    // The MLPs learn corrections on top of the pair mean; see MetaRegressor.
    let train_res = residual_targets(meta_train)?;
    let val_res = residual_targets(meta_val)?;

    let results: Vec<Option<(Network, f64)>> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, candidate)| {
            let init_seed = derive_seed(master_seed, &[day_index as u64, idx as u64, 1]);
            let shuffle_seed = derive_seed(master_seed, &[day_index as u64, idx as u64, 2]);
            let mut net = candidate.build(init_seed).ok()?;
            let outcome = train_early_stopping(
                &mut net,
                &train_res,
                &val_res,
                &candidate.train_config(shuffle_seed),
                &stop,
            )
            .ok()?;
            Some((net, outcome.best_val_mse))
        })
        .collect();

    let scores: GridScores = results
        .iter()
        .map(|r| r.as_ref().map(|(_, score)| *score))
        .collect();
    let mut winner: Option<(usize, f64)> = None;
    for (idx, score) in scores.iter().enumerate() {
        if let Some(score) = score {
            if winner.map_or(true, |(_, best)| *score < best) {
                winner = Some((idx, *score));
            }
        }
    }
    let (idx, validation_score) =
        winner.ok_or_else(|| Error::GridSearch("all candidates diverged".into()))?;
    let model = results
        .into_iter()
        .nth(idx)
        .flatten()
        .map(|(net, _)| net)
        .expect("winner index points at a trained model");
    Ok((
        MetaRegressor {
            day_index,
            model,
            chosen: grid[idx],
            validation_score,
        },
        scores,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Builds `(pair) -> target` datasets where the target is a known
    /// function of the two inputs.
    fn pair_dataset(n: usize, seed: u64, f: impl Fn(f64, f64) -> f64) -> WindowedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::with_capacity(2 * n);
        let mut targets = Vec::with_capacity(n);
        let mut dates = Vec::with_capacity(n);
        for i in 0..n {
            let a = rng.gen_range(0.2..0.8);
            let b = rng.gen_range(0.2..0.8);
            inputs.extend_from_slice(&[a, b]);
            targets.push(f(a, b));
            dates.push(NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Duration::days(i as i64));
        }
        WindowedDataset {
            input_len: 1,
            horizon: 1,
            feature_count: 2,
            inputs,
            targets,
            target_start_dates: dates,
        }
    }

    #[test]
    fn full_grid_has_400_candidates_in_major_order() {
        let grid = full_grid();
        assert_eq!(grid.len(), 400);
        // 40 consecutive candidates share each hidden-layer triple.
        for (i, candidate) in grid.iter().enumerate() {
            assert_eq!(candidate.hidden_layers, HIDDEN_LAYER_CHOICES[i / 40]);
            candidate.validate().unwrap();
        }
        assert_eq!(grid[0].activation, Activation::Relu);
        assert_eq!(grid[0].solver, OptimizerKind::Adam);
        assert_eq!(grid[0].learning_rate, 1e-4);
        assert_eq!(grid[0].lr_update, LrSchedule::Adaptive);
        // All candidates distinct.
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                assert_ne!(grid[i], grid[j]);
            }
        }
    }

    #[test]
    fn small_grid_is_a_grid_subset() {
        let small = small_grid();
        let full = full_grid();
        assert_eq!(small.len(), 8);
        for candidate in &small {
            assert!(full.contains(candidate));
        }
    }

    #[test]
    fn out_of_grid_candidate_rejected() {
        let mut candidate = full_grid()[0];
        candidate.learning_rate = 0.9;
        assert!(candidate.validate().is_err());
        let val = pair_dataset(10, 1, |a, _| a);
        assert!(grid_search_meta(1, &val, &val, &[candidate], 7).is_err());
    }

    #[test]
    fn single_candidate_grid_selects_it() {
        let train = pair_dataset(40, 1, |a, b| 0.5 * (a + b));
        let val = pair_dataset(10, 2, |a, b| 0.5 * (a + b));
        let grid = [full_grid()[0]];
        let (meta, scores) = grid_search_meta(3, &train, &val, &grid, 11).unwrap();
        assert_eq!(meta.chosen, grid[0]);
        assert_eq!(meta.day_index, 3);
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0], Some(meta.validation_score));
    }

    #[test]
    fn winner_validation_score_is_minimal_over_grid() {
        let train = pair_dataset(60, 3, |a, b| 0.4 * a + 0.6 * b);
        let val = pair_dataset(20, 4, |a, b| 0.4 * a + 0.6 * b);
        let grid = small_grid();
        let (meta, scores) = grid_search_meta(1, &train, &val, &grid, 5).unwrap();
        for score in scores.iter().flatten() {
            assert!(meta.validation_score <= *score + 1e-15);
        }
        // Restored parameters really score what the search reports: the
        // fused prediction (pair mean + correction) must reproduce the
        // recorded validation MSE on the original targets.
        let recomputed: f64 = (0..val.n_windows())
            .map(|w| {
                let input = val.input(w);
                let fused = meta.predict_pair([input[0], input[1]]).unwrap();
                let err = fused - val.target(w)[0];
                err * err
            })
            .sum::<f64>()
            / val.n_windows() as f64;
        assert!((recomputed - meta.validation_score).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic() {
        let train = pair_dataset(40, 3, |a, b| 0.4 * a + 0.6 * b);
        let val = pair_dataset(12, 4, |a, b| 0.4 * a + 0.6 * b);
        let grid = small_grid();
        let (ma, sa) = grid_search_meta(2, &train, &val, &grid, 5).unwrap();
        let (mb, sb) = grid_search_meta(2, &train, &val, &grid, 5).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(ma.chosen, mb.chosen);
        let mut a = ma.model;
        let mut b = mb.model;
        assert_eq!(a.params_flat(), b.params_flat());
    }

    /// Builds pairs that mimic two forecasters tracking the same series:
    /// the second input is the first plus bounded disagreement noise.
    fn agreeing_pair_dataset(n: usize, seed: u64, spread: f64) -> WindowedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::with_capacity(2 * n);
        let mut targets = Vec::with_capacity(n);
        let mut dates = Vec::with_capacity(n);
        for i in 0..n {
            let a = rng.gen_range(0.2..0.8);
            let b = a + rng.gen_range(-spread..spread);
            inputs.extend_from_slice(&[a, b]);
            targets.push(a);
            dates.push(
                NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Duration::days(i as i64),
            );
        }
        WindowedDataset {
            input_len: 1,
            horizon: 1,
            feature_count: 2,
            inputs,
            targets,
            target_start_dates: dates,
        }
    }

    #[test]
    fn identity_target_beats_identity_baseline_tolerance() {
        // Targets equal the first input exactly, as when the target series
        // is one base model's own prediction; the selected meta must be at
        // least as good as copying that input, within tolerance.
        let train = agreeing_pair_dataset(80, 6, 0.08);
        let val = agreeing_pair_dataset(24, 7, 0.08);
        let baseline: f64 = (0..val.n_windows())
            .map(|w| {
                let p = val.input(w)[0];
                let t = val.target(w)[0];
                (p - t) * (p - t)
            })
            .sum::<f64>()
            / val.n_windows() as f64;
        assert!(baseline.abs() < 1e-30);
        let (meta, _) = grid_search_meta(1, &train, &val, &small_grid(), 9).unwrap();
        assert!(
            meta.validation_score <= baseline + 1e-3,
            "val MSE {} vs baseline {baseline}",
            meta.validation_score
        );
    }

    #[test]
    fn fresh_meta_outputs_pair_mean_exactly() {
        let candidate = full_grid()[137];
        let model = candidate.build(99).unwrap();
        let meta = MetaRegressor {
            day_index: 1,
            model,
            chosen: candidate,
            validation_score: f64::INFINITY,
        };
        for pair in [[0.2, 0.6], [0.9, 0.1], [0.0, 0.0], [0.47, 0.53]] {
            let fused = meta.predict_pair(pair).unwrap();
            assert!(
                (fused - 0.5 * (pair[0] + pair[1])).abs() < 1e-15,
                "untrained meta must reproduce the pair mean, got {fused} for {pair:?}"
            );
        }
    }
}
