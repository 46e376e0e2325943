//! Adam and SGD parameter updates over a network's parameter blocks.

use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};

/// Learning-rate schedule for SGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Divide the rate by 5 whenever the training loss fails to improve by
    /// at least 1e-4 for two consecutive epochs.
    Adaptive,
}

const ADAPTIVE_TOL: f64 = 1e-4;
const ADAPTIVE_PATIENCE: u32 = 2;
const ADAPTIVE_DIVISOR: f64 = 5.0;

/// Adam with bias-corrected first and second moments
/// (`beta1=0.9`, `beta2=0.999`, `eps=1e-8`).
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

/// Plain gradient descent, optionally with the adaptive schedule.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub schedule: LrSchedule,
    best_loss: f64,
    stall_epochs: u32,
}

impl Sgd {
    pub fn new(lr: f64, schedule: LrSchedule) -> Self {
        Sgd {
            lr,
            schedule,
            best_loss: f64::INFINITY,
            stall_epochs: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam(Adam::new(lr))
    }

    pub fn sgd(lr: f64, schedule: LrSchedule) -> Self {
        Optimizer::Sgd(Sgd::new(lr, schedule))
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Optimizer::Adam(a) => a.lr,
            Optimizer::Sgd(s) => s.lr,
        }
    }

    /// Applies one update using the gradients currently accumulated in the
    /// network. Gradients must be finite.
    pub fn step(&mut self, net: &mut Network) -> Result<()> {
        let blocks = net.param_blocks_mut();
        for (_, grads) in &blocks {
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient);
            }
        }
        match self {
            Optimizer::Adam(adam) => {
                let total: usize = blocks.iter().map(|(v, _)| v.len()).sum();
                if adam.m.len() != total {
                    adam.m = vec![0.0; total];
                    adam.v = vec![0.0; total];
                }
                adam.t += 1;
                let bc1 = 1.0 - adam.beta1.powi(adam.t as i32);
                let bc2 = 1.0 - adam.beta2.powi(adam.t as i32);
                let mut offset = 0;
                for (values, grads) in blocks {
                    for (i, (value, grad)) in values.iter_mut().zip(grads.iter()).enumerate() {
                        let j = offset + i;
                        adam.m[j] = adam.beta1 * adam.m[j] + (1.0 - adam.beta1) * grad;
                        adam.v[j] = adam.beta2 * adam.v[j] + (1.0 - adam.beta2) * grad * grad;
                        let m_hat = adam.m[j] / bc1;
                        let v_hat = adam.v[j] / bc2;
                        *value -= adam.lr * m_hat / (v_hat.sqrt() + adam.eps);
                    }
                    offset += values.len();
                }
            }
            Optimizer::Sgd(sgd) => {
                for (values, grads) in blocks {
                    for (value, grad) in values.iter_mut().zip(grads.iter()) {
                        *value -= sgd.lr * grad;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reports the finished epoch's training loss so schedules can react.
    pub fn end_epoch(&mut self, train_loss: f64) {
        if let Optimizer::Sgd(sgd) = self {
            if sgd.schedule == LrSchedule::Adaptive {
                if train_loss > sgd.best_loss - ADAPTIVE_TOL {
                    sgd.stall_epochs += 1;
                } else {
                    sgd.stall_epochs = 0;
                }
                if train_loss < sgd.best_loss {
                    sgd.best_loss = train_loss;
                }
                if sgd.stall_epochs >= ADAPTIVE_PATIENCE {
                    sgd.lr /= ADAPTIVE_DIVISOR;
                    sgd.stall_epochs = 0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense, Layer, Network, Shape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(weight: f64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dense = Dense::new(1, 1, Activation::Linear, &mut rng).unwrap();
        let mut net = Network::new(Shape::Vector(1), vec![Layer::Dense(dense)], 0).unwrap();
        net.set_params_flat(&[weight, 0.0]).unwrap();
        net
    }

    fn set_grads(net: &mut Network, grads: &[f64]) {
        let mut offset = 0;
        for (_, g) in net.param_blocks_mut() {
            let len = g.len();
            g.copy_from_slice(&grads[offset..offset + len]);
            offset += len;
        }
    }

    #[test]
    fn sgd_scalar_step() {
        let mut net = scalar_net(0.0);
        let mut opt = Optimizer::sgd(0.1, LrSchedule::Constant);
        set_grads(&mut net, &[1.0, 0.0]);
        opt.step(&mut net).unwrap();
        let params = net.params_flat();
        assert!((params[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut net = scalar_net(3.0);
        let before = net.params_flat();
        let mut opt = Optimizer::adam(0.01);
        set_grads(&mut net, &[0.0, 0.0]);
        opt.step(&mut net).unwrap();
        assert_eq!(net.params_flat(), before);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // With bias correction, the first update is lr * g/(|g| + eps').
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(0.001);
        set_grads(&mut net, &[0.5, 0.0]);
        opt.step(&mut net).unwrap();
        let params = net.params_flat();
        assert!((params[0] - (1.0 - 0.001)).abs() < 1e-6);
    }

    #[test]
    fn adam_three_step_scalar_oracle() {
        // Hand-rolled reference of the published recurrences on a scalar.
        let grads = [0.3, -0.2, 0.7];
        let (lr, b1, b2, eps): (f64, f64, f64, f64) = (0.01, 0.9, 0.999, 1e-8);
        let (mut theta, mut m, mut v) = (1.5, 0.0, 0.0);
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }

        let mut net = scalar_net(1.5);
        net.set_params_flat(&[1.5, 0.0]).unwrap();
        let mut opt = Optimizer::adam(lr);
        for g in grads {
            set_grads(&mut net, &[g, 0.0]);
            opt.step(&mut net).unwrap();
        }
        assert!((net.params_flat()[0] - theta).abs() < 1e-14);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut net = scalar_net(0.0);
        let mut opt = Optimizer::adam(0.01);
        set_grads(&mut net, &[f64::NAN, 0.0]);
        assert!(matches!(opt.step(&mut net), Err(Error::NonFiniteGradient)));
    }

    #[test]
    fn constant_schedule_never_changes_lr() {
        let mut opt = Optimizer::sgd(0.2, LrSchedule::Constant);
        for loss in [1.0, 1.0, 1.0, 1.0, 5.0, 0.1] {
            opt.end_epoch(loss);
        }
        assert_eq!(opt.learning_rate(), 0.2);
    }

    #[test]
    fn adaptive_schedule_divides_after_two_stalled_epochs() {
        // First epoch sets the baseline; the two following stalled epochs
        // trigger exactly one division.
        let mut opt = Optimizer::sgd(0.5, LrSchedule::Adaptive);
        opt.end_epoch(1.0);
        assert_eq!(opt.learning_rate(), 0.5);
        opt.end_epoch(1.0);
        assert_eq!(opt.learning_rate(), 0.5);
        opt.end_epoch(1.0);
        assert!((opt.learning_rate() - 0.1).abs() < 1e-15);
        // Counter restarts after a division: two more stalls divide again.
        opt.end_epoch(1.0);
        assert!((opt.learning_rate() - 0.1).abs() < 1e-15);
        opt.end_epoch(1.0);
        assert!((opt.learning_rate() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn adaptive_schedule_resets_on_improvement() {
        let mut opt = Optimizer::sgd(0.5, LrSchedule::Adaptive);
        opt.end_epoch(1.0);
        opt.end_epoch(0.5);
        opt.end_epoch(0.25);
        assert_eq!(opt.learning_rate(), 0.5);
    }

    #[test]
    fn adam_lr_zero_is_identity() {
        let mut net = scalar_net(2.0);
        let before = net.params_flat();
        let mut opt = Optimizer::adam(0.0);
        set_grads(&mut net, &[0.7, 0.1]);
        opt.step(&mut net).unwrap();
        assert_eq!(net.params_flat(), before);
    }
}
