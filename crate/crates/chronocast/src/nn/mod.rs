//! From-scratch feed-forward/recurrent networks on 64-bit floats.
//!
//! Fixed sequential stacks only: each [`Layer`] caches what its backward
//! pass needs during a training forward, and exposes a cache-free `predict`
//! path for evaluation. Gradients are exact analytic derivatives; the
//! [`gradcheck`] module verifies them against central finite differences.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod train;

pub use gradcheck::gradient_check;
pub use layers::{Conv1d, Dense, Dropout, GlobalAvgPool, Layer, LayerSpec, Lstm};
pub use optim::{Adam, LrSchedule, Optimizer, Sgd};
pub use train::{
    dataset_mse, mse_loss, train, train_early_stopping, EarlyStopConfig, OptimizerKind,
    TrainConfig, TrainOutcome,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied elementwise after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    pub fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Shape of the data flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Vector(usize),
    Seq { len: usize, channels: usize },
}

impl Shape {
    pub fn size(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Seq { len, channels } => len * channels,
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Vector(n) => write!(f, "({n})"),
            Shape::Seq { len, channels } => write!(f, "({len}x{channels})"),
        }
    }
}

/// Row-major dense matrix used in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "tensor {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "tensor {rows}x{cols} contains non-finite entry {bad}"
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }
}

/// A sequential stack of layers plus the RNG stream that initialized it and
/// feeds its dropout masks.
#[derive(Debug, Clone)]
pub struct Network {
    pub in_shape: Shape,
    pub layers: Vec<Layer>,
    shapes: Vec<Shape>,
    rng: ChaCha8Rng,
    seed: u64,
    has_forward: bool,
}

impl Network {
    /// Validates that adjacent layer shapes compose; `seed` initializes the
    /// dropout stream (weights are initialized by the layer constructors).
    pub fn new(in_shape: Shape, layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let mut shapes = Vec::with_capacity(layers.len() + 1);
        shapes.push(in_shape);
        let mut shape = in_shape;
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.out_shape(shape).map_err(|e| {
                Error::ShapeMismatch(format!("layer {i} ({}): {e}", layer.kind_name()))
            })?;
            shapes.push(shape);
        }
        Ok(Network {
            in_shape,
            layers,
            shapes,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            has_forward: false,
        })
    }

    /// Builds a stack from serializable layer specs with fresh seeded weights.
    pub fn from_specs(in_shape: Shape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = in_shape;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = Layer::from_spec(spec, &mut rng)?;
            shape = layer.out_shape(shape)?;
            layers.push(layer);
        }
        Network::new(in_shape, layers, seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn out_shape(&self) -> Shape {
        *self.shapes.last().unwrap()
    }

    pub fn out_dim(&self) -> usize {
        self.out_shape().size()
    }

    /// Per-layer output shapes, input shape first.
    pub fn shape_chain(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_shape.size() {
            return Err(Error::ShapeMismatch(format!(
                "input length {} does not match network input shape {}",
                input.len(),
                self.in_shape
            )));
        }
        Ok(())
    }

    /// Training-mode forward: dropout active, per-layer caches retained for
    /// the next [`Network::backward`] call.
    pub fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for layer in &mut self.layers {
            current = layer.forward_train(&current, &mut self.rng)?;
            if current.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient);
            }
        }
        self.has_forward = true;
        Ok(current)
    }

    /// Accumulates parameter gradients for the cached forward pass and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>> {
        if !self.has_forward {
            return Err(Error::MissingForward);
        }
        if grad_out.len() != self.out_dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient length {} does not match output shape {}",
                grad_out.len(),
                self.out_shape()
            )));
        }
        let mut grad = grad_out.to_vec();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    /// Evaluation-mode forward: no dropout, no caches, no RNG consumption.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for layer in &self.layers {
            current = layer.predict(&current)?;
        }
        Ok(current)
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grads();
        }
    }

    /// Disjoint `(values, gradients)` slices for every parameter block, in a
    /// stable order (layer order; within a layer, the layer's fixed order).
    pub fn param_blocks_mut(&mut self) -> Vec<(&mut Vec<f64>, &mut Vec<f64>)> {
        let mut blocks = Vec::new();
        for layer in &mut self.layers {
            layer.collect_param_blocks(&mut blocks);
        }
        blocks
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params_flat(&mut self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (values, _) in self.param_blocks_mut() {
            out.extend_from_slice(values);
        }
        out
    }

    pub fn grads_flat(&mut self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, grads) in self.param_blocks_mut() {
            out.extend_from_slice(grads);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector length {} does not match model size {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for (values, _) in self.param_blocks_mut() {
            let len = values.len();
            values.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Freezes (or unfreezes) dropout masks in place for finite-difference
    /// verification; frozen layers reuse their last sampled mask.
    pub fn freeze_dropout(&mut self, frozen: bool) {
        for layer in &mut self.layers {
            if let Layer::Dropout(d) = layer {
                d.frozen = frozen;
            }
        }
    }

    /// Per-block checkpoint tensors with their logical shapes.
    pub fn param_tensors(&mut self) -> Vec<Tensor2> {
        let shapes: Vec<(usize, usize)> = self
            .layers
            .iter()
            .flat_map(Layer::param_block_shapes)
            .collect();
        let blocks = self.param_blocks_mut();
        shapes
            .into_iter()
            .zip(blocks)
            .map(|((rows, cols), (values, _))| Tensor2 {
                rows,
                cols,
                data: values.clone(),
            })
            .collect()
    }

    /// Loads checkpoint tensors, rejecting any shape disagreement.
    pub fn load_param_tensors(&mut self, tensors: &[Tensor2]) -> Result<()> {
        let shapes: Vec<(usize, usize)> = self
            .layers
            .iter()
            .flat_map(Layer::param_block_shapes)
            .collect();
        if tensors.len() != shapes.len() {
            return Err(Error::InvalidCheckpoint(format!(
                "expected {} parameter tensors, found {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (i, (tensor, &(rows, cols))) in tensors.iter().zip(&shapes).enumerate() {
            if tensor.rows != rows || tensor.cols != cols {
                return Err(Error::InvalidCheckpoint(format!(
                    "tensor {i} is {}x{}, model expects {rows}x{cols}",
                    tensor.rows, tensor.cols
                )));
            }
            if tensor.data.len() != rows * cols {
                return Err(Error::InvalidCheckpoint(format!(
                    "tensor {i} data length {} does not match {rows}x{cols}",
                    tensor.data.len()
                )));
            }
            if tensor.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCheckpoint(format!(
                    "tensor {i} contains non-finite values"
                )));
            }
        }
        for (tensor, (values, _)) in tensors.iter().zip(self.param_blocks_mut()) {
            values.copy_from_slice(&tensor.data);
        }
        Ok(())
    }
}
