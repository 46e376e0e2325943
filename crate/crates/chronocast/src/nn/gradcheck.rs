//! Central finite-difference verification of the analytic gradients.

use super::{train::mse_loss, Network};
use crate::error::Result;

/// Compares the analytic parameter gradient of the MSE loss on one sample
/// against central finite differences and returns the maximum relative
/// error `|a - n| / max(|a|, |n|, 1e-8)` over all parameters.
///
/// Dropout masks are sampled once and frozen so every loss evaluation sees
/// the same stochastic network. Intended for small models (≤ 5e3
/// parameters); cost is two forward passes per parameter.
pub fn gradient_check(
    net: &mut Network,
    input: &[f64],
    target: &[f64],
    epsilon: f64,
) -> Result<f64> {
    // Materialize dropout masks, then freeze them for the whole check.
    net.forward_train(input)?;
    net.freeze_dropout(true);

    let result = gradient_check_frozen(net, input, target, epsilon);
    net.freeze_dropout(false);
    result
}

fn gradient_check_frozen(
    net: &mut Network,
    input: &[f64],
    target: &[f64],
    epsilon: f64,
) -> Result<f64> {
    net.zero_grads();
    let pred = net.forward_train(input)?;
    let (_, grad) = mse_loss(&pred, target)?;
    net.backward(&grad)?;
    let analytic = net.grads_flat();

    let mut params = net.params_flat();
    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        let saved = params[i];
        params[i] = saved + epsilon;
        net.set_params_flat(&params)?;
        let plus = loss_at(net, input, target)?;
        params[i] = saved - epsilon;
        net.set_params_flat(&params)?;
        let minus = loss_at(net, input, target)?;
        params[i] = saved;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    net.set_params_flat(&params)?;
    Ok(max_rel)
}

fn loss_at(net: &mut Network, input: &[f64], target: &[f64]) -> Result<f64> {
    let pred = net.forward_train(input)?;
    let (loss, _) = mse_loss(&pred, target)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{
        Activation, Conv1d, Dense, Dropout, GlobalAvgPool, Layer, Lstm, Shape,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    fn sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn dense_relu_stack() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layers = vec![
            Layer::Dense(Dense::new(6, 8, Activation::Relu, &mut rng).unwrap()),
            Layer::Dense(Dense::new(8, 5, Activation::Tanh, &mut rng).unwrap()),
            Layer::Dense(Dense::new(5, 3, Activation::Linear, &mut rng).unwrap()),
        ];
        let mut net = Network::new(Shape::Vector(6), layers, 21).unwrap();
        let input = sample(&mut rng, 6);
        let target = sample(&mut rng, 3);
        let err = gradient_check(&mut net, &input, &target, EPS).unwrap();
        assert!(err < TOL, "max relative error {err}");
    }

    #[test]
    fn lstm_over_short_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let layers = vec![
            Layer::Lstm(Lstm::new(3, 4, &mut rng).unwrap()),
            Layer::Dense(Dense::new(4, 2, Activation::Linear, &mut rng).unwrap()),
        ];
        let mut net = Network::new(Shape::Seq { len: 6, channels: 3 }, layers, 22).unwrap();
        let input = sample(&mut rng, 18);
        let target = sample(&mut rng, 2);
        let err = gradient_check(&mut net, &input, &target, EPS).unwrap();
        assert!(err < TOL, "max relative error {err}");
    }

    #[test]
    fn conv_pool_dense_stack() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let layers = vec![
            Layer::Conv1d(Conv1d::new(2, 5, 3, Activation::Relu, &mut rng).unwrap()),
            Layer::Conv1d(Conv1d::new(5, 4, 3, Activation::Relu, &mut rng).unwrap()),
            Layer::GlobalAvgPool(GlobalAvgPool::new(4).unwrap()),
            Layer::Dense(Dense::new(4, 2, Activation::Linear, &mut rng).unwrap()),
        ];
        let mut net = Network::new(Shape::Seq { len: 8, channels: 2 }, layers, 23).unwrap();
        let input = sample(&mut rng, 16);
        let target = sample(&mut rng, 2);
        let err = gradient_check(&mut net, &input, &target, EPS).unwrap();
        assert!(err < TOL, "max relative error {err}");
    }

    #[test]
    fn dropout_with_frozen_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let layers = vec![
            Layer::Dense(Dense::new(5, 8, Activation::Tanh, &mut rng).unwrap()),
            Layer::Dropout(Dropout::new(0.4).unwrap()),
            Layer::Dense(Dense::new(8, 3, Activation::Linear, &mut rng).unwrap()),
        ];
        let mut net = Network::new(Shape::Vector(5), layers, 24).unwrap();
        let input = sample(&mut rng, 5);
        let target = sample(&mut rng, 3);
        let err = gradient_check(&mut net, &input, &target, EPS).unwrap();
        assert!(err < TOL, "max relative error {err}");
    }

    #[test]
    fn rate_zero_dropout_is_passthrough() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let layers = vec![
            Layer::Dense(Dense::new(4, 4, Activation::Relu, &mut rng).unwrap()),
            Layer::Dropout(Dropout::new(0.0).unwrap()),
            Layer::Dense(Dense::new(4, 2, Activation::Linear, &mut rng).unwrap()),
        ];
        let mut net = Network::new(Shape::Vector(4), layers, 25).unwrap();
        let input = sample(&mut rng, 4);
        let train_out = net.forward_train(&input).unwrap();
        let eval_out = net.predict(&input).unwrap();
        for (a, b) in train_out.iter().zip(&eval_out) {
            assert!((a - b).abs() < 1e-15);
        }
        let target = sample(&mut rng, 2);
        let err = gradient_check(&mut net, &input, &target, EPS).unwrap();
        assert!(err < TOL);
    }

    #[test]
    fn single_linear_dense_matches_closed_form() {
        // d/dW of mean((Wx + b - t)^2) on one sample is 2 (pred - t) x^T.
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let dense = Dense::new(3, 1, Activation::Linear, &mut rng).unwrap();
        let mut net = Network::new(Shape::Vector(3), vec![Layer::Dense(dense)], 26).unwrap();
        let input = [0.3, -0.2, 0.5];
        let target = [0.9];
        let pred = net.forward_train(&input).unwrap();
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        net.zero_grads();
        net.forward_train(&input).unwrap();
        net.backward(&grad).unwrap();
        let grads = net.grads_flat();
        let residual = 2.0 * (pred[0] - target[0]);
        for (i, &x) in input.iter().enumerate() {
            assert!((grads[i] - residual * x).abs() < 1e-12);
        }
        assert!((grads[3] - residual).abs() < 1e-12);
    }
}
