//! Mini-batch training with seeded shuffling, plus the full-batch
//! early-stopping loop used by the meta-regressor grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LrSchedule, Network, Optimizer};
use crate::error::{Error, Result};
use crate::window::WindowedDataset;

/// Optimizer selector for [`TrainConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Hyperparameters of one training run. The loss is always MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
    pub optimizer: OptimizerKind,
    pub lr_schedule: LrSchedule,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn build_optimizer(&self) -> Optimizer {
        match self.optimizer {
            OptimizerKind::Adam => Optimizer::adam(self.learning_rate),
            OptimizerKind::Sgd => Optimizer::sgd(self.learning_rate, self.lr_schedule),
        }
    }
}

/// Mean over all elements of the squared error, with its gradient with
/// respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidConfig("mse over empty vectors".into()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let e = p - t;
        loss += e * e;
        grad.push(2.0 * e / n);
    }
    Ok((loss / n, grad))
}

/// Trains in place and returns the per-epoch training-loss history
/// (sample-weighted mean of batch losses). Each epoch shuffles the window
/// order with the seeded generator and applies one optimizer step per batch.
pub fn train(
    net: &mut Network,
    data: &WindowedDataset,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let n = data.n_windows();
    if n == 0 {
        return Err(Error::InsufficientData("no training windows".into()));
    }
    let mut optimizer = config.build_optimizer();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            net.zero_grads();
            let inv_batch = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &w in batch {
                let pred = net
                    .forward_train(data.input(w))
                    .map_err(|e| divergence(e, epoch))?;
                let (loss, mut grad) = mse_loss(&pred, data.target(w))?;
                batch_loss += loss;
                grad.iter_mut().for_each(|g| *g *= inv_batch);
                net.backward(&grad)?;
            }
            batch_loss *= inv_batch;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            optimizer
                .step(net)
                .map_err(|e| divergence(e, epoch))?;
            epoch_loss += batch_loss * batch.len() as f64;
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(epoch_loss);
        optimizer.end_epoch(epoch_loss);
    }
    Ok(history)
}

fn divergence(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFiniteGradient => Error::Divergence { epoch },
        other => other,
    }
}

/// Stopping rule for [`train_early_stopping`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopConfig {
    pub max_epochs: usize,
    /// Minimum validation-MSE improvement that counts.
    pub tol: f64,
    /// Number of non-improving epochs tolerated before stopping.
    pub patience: usize,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig {
            max_epochs: 300,
            tol: 1e-6,
            patience: 20,
        }
    }
}

/// Result of an early-stopped run; the network is left holding the
/// best-validation parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub train_history: Vec<f64>,
    pub val_history: Vec<f64>,
    pub best_val_mse: f64,
    pub best_epoch: usize,
}

/// Evaluation-mode MSE of the network over a dataset.
pub fn dataset_mse(net: &Network, data: &WindowedDataset) -> Result<f64> {
    let n = data.n_windows();
    if n == 0 {
        return Err(Error::InsufficientData("no windows to evaluate".into()));
    }
    let mut total = 0.0;
    for w in 0..n {
        let pred = net.predict(data.input(w))?;
        let (loss, _) = mse_loss(&pred, data.target(w))?;
        total += loss;
    }
    Ok(total / n as f64)
}

/// Full-batch training that stops once validation MSE has not improved by
/// `tol` for `patience` consecutive epochs, then restores the parameters of
/// the best validation epoch.
pub fn train_early_stopping(
    net: &mut Network,
    train_data: &WindowedDataset,
    val_data: &WindowedDataset,
    config: &TrainConfig,
    stop: &EarlyStopConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if stop.max_epochs == 0 {
        return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
    }
    let mut optimizer = config.build_optimizer();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let n = train_data.n_windows();
    if n == 0 {
        return Err(Error::InsufficientData("no training windows".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();

    let mut train_history = Vec::new();
    let mut val_history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = net.params_flat();
    let mut stall = 0usize;

    for epoch in 0..stop.max_epochs {
        order.shuffle(&mut shuffle_rng);
        net.zero_grads();
        let inv = 1.0 / n as f64;
        let mut loss_sum = 0.0;
        for &w in &order {
            let pred = net
                .forward_train(train_data.input(w))
                .map_err(|e| divergence(e, epoch))?;
            let (loss, mut grad) = mse_loss(&pred, train_data.target(w))?;
            loss_sum += loss;
            grad.iter_mut().for_each(|g| *g *= inv);
            net.backward(&grad)?;
        }
        let train_loss = loss_sum * inv;
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        optimizer.step(net).map_err(|e| divergence(e, epoch))?;
        optimizer.end_epoch(train_loss);
        train_history.push(train_loss);

        let val_mse = dataset_mse(net, val_data)?;
        if !val_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        val_history.push(val_mse);
        if val_mse < best_val - stop.tol {
            best_val = val_mse;
            best_epoch = epoch;
            best_params = net.params_flat();
            stall = 0;
        } else {
            stall += 1;
            if stall >= stop.patience {
                break;
            }
        }
    }

    net.set_params_flat(&best_params)?;
    Ok(TrainOutcome {
        train_history,
        val_history,
        best_val_mse: best_val,
        best_epoch,
    })
}
