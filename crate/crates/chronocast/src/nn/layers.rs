//! The five layer kinds used by the forecasting stacks, with exact analytic
//! backward passes (full BPTT for the LSTM, transposed correlation for the
//! 1-D convolution, inverted dropout).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Shape};
use crate::error::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Glorot (Xavier) uniform draw: `U(-l, l)` with `l = sqrt(6/(fan_in+fan_out))`.
fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// Serializable description of a layer, without its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    },
    Lstm {
        input_dim: usize,
        hidden_units: usize,
        return_last_state: bool,
    },
    Conv1d {
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
    GlobalAvgPool {
        channels: usize,
    },
}

/// Fully connected layer computing `act(W x + b)`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// `out_dim x in_dim`, row-major.
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) dw: Vec<f64>,
    pub(crate) db: Vec<f64>,
    cache_in: Vec<f64>,
    cache_out: Vec<f64>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig("dense dimensions must be positive".into()));
        }
        Ok(Dense {
            in_dim,
            out_dim,
            activation,
            w: glorot(rng, in_dim, out_dim, in_dim * out_dim),
            b: vec![0.0; out_dim],
            dw: vec![0.0; in_dim * out_dim],
            db: vec![0.0; out_dim],
            cache_in: Vec::new(),
            cache_out: Vec::new(),
        })
    }

    /// Overwrites every bias entry; used to start forecasting heads at the
    /// midpoint of the normalized target range.
    pub fn set_bias_constant(&mut self, value: f64) {
        self.b.iter_mut().for_each(|b| *b = value);
    }

    fn run(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.out_dim {
            let row = &self.w[i * self.in_dim..(i + 1) * self.in_dim];
            let mut acc = self.b[i];
            for (wij, xj) in row.iter().zip(input) {
                acc += wij * xj;
            }
            out.push(self.activation.apply(acc));
        }
    }
}

/// Single-layer LSTM consuming a `(T, input_dim)` sequence and emitting the
/// final hidden state. Gate order throughout: input, forget, candidate,
/// output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden: usize,
    /// Input kernels, each `hidden x input_dim`.
    pub(crate) w: [Vec<f64>; 4],
    /// Recurrent kernels, each `hidden x hidden`.
    pub(crate) u: [Vec<f64>; 4],
    pub(crate) b: [Vec<f64>; 4],
    pub(crate) dw: [Vec<f64>; 4],
    pub(crate) du: [Vec<f64>; 4],
    pub(crate) db: [Vec<f64>; 4],
    cache_x: Vec<f64>,
    /// Post-activation gate values, `T x hidden` each.
    cache_gates: [Vec<f64>; 4],
    cache_c: Vec<f64>,
    cache_h: Vec<f64>,
    cache_tanh_c: Vec<f64>,
    cache_steps: usize,
}

impl Lstm {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::InvalidConfig("lstm dimensions must be positive".into()));
        }
        let w = std::array::from_fn(|_| glorot(rng, input_dim, hidden, input_dim * hidden));
        let u = std::array::from_fn(|_| glorot(rng, hidden, hidden, hidden * hidden));
        let mut b: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
        // Forget-gate bias starts at 1 so early training does not erase the
        // cell state.
        b[1].iter_mut().for_each(|v| *v = 1.0);
        Ok(Lstm {
            input_dim,
            hidden,
            w,
            u,
            b,
            dw: std::array::from_fn(|_| vec![0.0; input_dim * hidden]),
            du: std::array::from_fn(|_| vec![0.0; hidden * hidden]),
            db: std::array::from_fn(|_| vec![0.0; hidden]),
            cache_x: Vec::new(),
            cache_gates: std::array::from_fn(|_| Vec::new()),
            cache_c: Vec::new(),
            cache_h: Vec::new(),
            cache_tanh_c: Vec::new(),
            cache_steps: 0,
        })
    }

    fn steps(&self, input: &[f64]) -> Result<usize> {
        if input.is_empty() || input.len() % self.input_dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "lstm input length {} is not a multiple of input_dim {}",
                input.len(),
                self.input_dim
            )));
        }
        Ok(input.len() / self.input_dim)
    }

    /// One unrolled pass; when `cache` is set every intermediate needed by
    /// BPTT is stored. Returns the final hidden state.
    fn run(&mut self, input: &[f64], cache: bool) -> Result<Vec<f64>> {
        let steps = self.steps(input)?;
        let h = self.hidden;
        if cache {
            self.cache_x.clear();
            self.cache_x.extend_from_slice(input);
            for g in &mut self.cache_gates {
                g.clear();
                g.reserve(steps * h);
            }
            self.cache_c.clear();
            self.cache_h.clear();
            self.cache_tanh_c.clear();
            self.cache_steps = steps;
        }
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut acts: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
        for t in 0..steps {
            let x_t = &input[t * self.input_dim..(t + 1) * self.input_dim];
            for gate in 0..4 {
                let w = &self.w[gate];
                let u = &self.u[gate];
                let b = &self.b[gate];
                let a = &mut acts[gate];
                for i in 0..h {
                    let mut acc = b[i];
                    let wrow = &w[i * self.input_dim..(i + 1) * self.input_dim];
                    for (wij, xj) in wrow.iter().zip(x_t) {
                        acc += wij * xj;
                    }
                    let urow = &u[i * h..(i + 1) * h];
                    for (uij, hj) in urow.iter().zip(&h_prev) {
                        acc += uij * hj;
                    }
                    a[i] = acc;
                }
            }
            for i in 0..h {
                let ig = sigmoid(acts[0][i]);
                let fg = sigmoid(acts[1][i]);
                let gg = acts[2][i].tanh();
                let og = sigmoid(acts[3][i]);
                let c = fg * c_prev[i] + ig * gg;
                let tc = c.tanh();
                let hv = og * tc;
                if cache {
                    self.cache_gates[0].push(ig);
                    self.cache_gates[1].push(fg);
                    self.cache_gates[2].push(gg);
                    self.cache_gates[3].push(og);
                    self.cache_c.push(c);
                    self.cache_tanh_c.push(tc);
                    self.cache_h.push(hv);
                }
                c_prev[i] = c;
                h_prev[i] = hv;
            }
        }
        Ok(h_prev)
    }

    /// Full backpropagation through time from the gradient of the final
    /// hidden state; returns the gradient with respect to the input sequence.
    fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>> {
        if self.cache_steps == 0 {
            return Err(Error::MissingForward);
        }
        let h = self.hidden;
        let steps = self.cache_steps;
        let mut dh = grad_out.to_vec();
        let mut dc = vec![0.0; h];
        let mut dh_prev = vec![0.0; h];
        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
        let mut dx = vec![0.0; steps * self.input_dim];

        for t in (0..steps).rev() {
            let base = t * h;
            for i in 0..h {
                let ig = self.cache_gates[0][base + i];
                let fg = self.cache_gates[1][base + i];
                let gg = self.cache_gates[2][base + i];
                let og = self.cache_gates[3][base + i];
                let tc = self.cache_tanh_c[base + i];
                let c_prev = if t > 0 { self.cache_c[base - h + i] } else { 0.0 };
                dc[i] += dh[i] * og * (1.0 - tc * tc);
                da[0][i] = dc[i] * gg * ig * (1.0 - ig);
                da[1][i] = dc[i] * c_prev * fg * (1.0 - fg);
                da[2][i] = dc[i] * ig * (1.0 - gg * gg);
                da[3][i] = dh[i] * tc * og * (1.0 - og);
            }
            let x_t = &self.cache_x[t * self.input_dim..(t + 1) * self.input_dim];
            let h_prev_slice: Option<&[f64]> = if t > 0 {
                Some(&self.cache_h[(t - 1) * h..t * h])
            } else {
                None
            };
            dh_prev.iter_mut().for_each(|v| *v = 0.0);
            for gate in 0..4 {
                let dag = &da[gate];
                let dwg = &mut self.dw[gate];
                let dug = &mut self.du[gate];
                let dbg = &mut self.db[gate];
                for i in 0..h {
                    let d = dag[i];
                    dbg[i] += d;
                    let dwrow = &mut dwg[i * self.input_dim..(i + 1) * self.input_dim];
                    for (dwij, xj) in dwrow.iter_mut().zip(x_t) {
                        *dwij += d * xj;
                    }
                    if let Some(hp) = h_prev_slice {
                        let durow = &mut dug[i * h..(i + 1) * h];
                        for (duij, hj) in durow.iter_mut().zip(hp) {
                            *duij += d * hj;
                        }
                    }
                }
                let wg = &self.w[gate];
                let ug = &self.u[gate];
                let dx_t = &mut dx[t * self.input_dim..(t + 1) * self.input_dim];
                for i in 0..h {
                    let d = dag[i];
                    let wrow = &wg[i * self.input_dim..(i + 1) * self.input_dim];
                    for (dxj, wij) in dx_t.iter_mut().zip(wrow) {
                        *dxj += d * wij;
                    }
                    let urow = &ug[i * h..(i + 1) * h];
                    for (dhj, uij) in dh_prev.iter_mut().zip(urow) {
                        *dhj += d * uij;
                    }
                }
            }
            for i in 0..h {
                dc[i] *= self.cache_gates[1][base + i];
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        Ok(dx)
    }
}

/// 1-D convolution along the time axis: stride 1, no padding, so a
/// `(T, in_channels)` sequence maps to `(T - kernel + 1, filters)`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub activation: Activation,
    /// `filters x kernel x in_channels`, row-major.
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) dw: Vec<f64>,
    pub(crate) db: Vec<f64>,
    cache_in: Vec<f64>,
    cache_out: Vec<f64>,
    cache_steps: usize,
}

impl Conv1d {
    pub fn new(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if in_channels == 0 || filters == 0 || kernel == 0 {
            return Err(Error::InvalidConfig("conv1d dimensions must be positive".into()));
        }
        let fan_in = in_channels * kernel;
        let fan_out = filters * kernel;
        Ok(Conv1d {
            in_channels,
            filters,
            kernel,
            activation,
            w: glorot(rng, fan_in, fan_out, filters * kernel * in_channels),
            b: vec![0.0; filters],
            dw: vec![0.0; filters * kernel * in_channels],
            db: vec![0.0; filters],
            cache_in: Vec::new(),
            cache_out: Vec::new(),
            cache_steps: 0,
        })
    }

    fn steps(&self, input: &[f64]) -> Result<usize> {
        if input.is_empty() || input.len() % self.in_channels != 0 {
            return Err(Error::ShapeMismatch(format!(
                "conv1d input length {} is not a multiple of {} channels",
                input.len(),
                self.in_channels
            )));
        }
        let t = input.len() / self.in_channels;
        if t < self.kernel {
            return Err(Error::ShapeMismatch(format!(
                "conv1d needs at least {} time steps, got {t}",
                self.kernel
            )));
        }
        Ok(t)
    }

    fn run(&self, input: &[f64], out: &mut Vec<f64>) -> Result<usize> {
        let t_in = self.steps(input)?;
        let t_out = t_in - self.kernel + 1;
        let c = self.in_channels;
        out.clear();
        out.reserve(t_out * self.filters);
        for t in 0..t_out {
            let window = &input[t * c..(t + self.kernel) * c];
            for f in 0..self.filters {
                let wf = &self.w[f * self.kernel * c..(f + 1) * self.kernel * c];
                let mut acc = self.b[f];
                for (wv, xv) in wf.iter().zip(window) {
                    acc += wv * xv;
                }
                out.push(self.activation.apply(acc));
            }
        }
        Ok(t_out)
    }

    fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>> {
        if self.cache_steps == 0 {
            return Err(Error::MissingForward);
        }
        let t_in = self.cache_steps;
        let t_out = t_in - self.kernel + 1;
        let c = self.in_channels;
        if grad_out.len() != t_out * self.filters {
            return Err(Error::ShapeMismatch(format!(
                "conv1d output gradient length {} expected {}",
                grad_out.len(),
                t_out * self.filters
            )));
        }
        let mut dx = vec![0.0; t_in * c];
        for t in 0..t_out {
            let window = &self.cache_in[t * c..(t + self.kernel) * c];
            let dx_window = &mut dx[t * c..(t + self.kernel) * c];
            for f in 0..self.filters {
                let y = self.cache_out[t * self.filters + f];
                let d = grad_out[t * self.filters + f] * self.activation.deriv_from_output(y);
                if d == 0.0 {
                    continue;
                }
                self.db[f] += d;
                let wf = &self.w[f * self.kernel * c..(f + 1) * self.kernel * c];
                let dwf = &mut self.dw[f * self.kernel * c..(f + 1) * self.kernel * c];
                for k in 0..self.kernel * c {
                    dwf[k] += d * window[k];
                    dx_window[k] += d * wf[k];
                }
            }
        }
        Ok(dx)
    }
}

/// Inverted dropout: surviving activations are scaled by `1/(1-rate)` at
/// train time so evaluation is a plain pass-through.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    /// Last sampled mask; entries are 0 or `1/(1-rate)`.
    pub(crate) mask: Vec<f64>,
    /// When set, `forward_train` reuses the stored mask (finite-difference
    /// verification needs the same mask across loss evaluations).
    pub frozen: bool,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        Ok(Dropout {
            rate,
            mask: Vec::new(),
            frozen: false,
        })
    }

    fn forward_train(&mut self, input: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        if self.rate == 0.0 {
            self.mask = vec![1.0; input.len()];
            return input.to_vec();
        }
        if !(self.frozen && self.mask.len() == input.len()) {
            let keep = 1.0 / (1.0 - self.rate);
            self.mask = (0..input.len())
                .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep })
                .collect();
        }
        input.iter().zip(&self.mask).map(|(x, m)| x * m).collect()
    }
}

/// Mean over the time axis: `(T, channels)` to `(channels)`.
#[derive(Debug, Clone)]
pub struct GlobalAvgPool {
    pub channels: usize,
    cache_steps: usize,
}

impl GlobalAvgPool {
    pub fn new(channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidConfig("pool channels must be positive".into()));
        }
        Ok(GlobalAvgPool {
            channels,
            cache_steps: 0,
        })
    }
}

/// Concrete layer dispatch.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Lstm(Lstm),
    Conv1d(Conv1d),
    Dropout(Dropout),
    GlobalAvgPool(GlobalAvgPool),
}

impl Layer {
    pub fn from_spec(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Layer> {
        match spec {
            LayerSpec::Dense { in_dim, out_dim, activation } => {
                Ok(Layer::Dense(Dense::new(*in_dim, *out_dim, *activation, rng)?))
            }
            LayerSpec::Lstm { input_dim, hidden_units, return_last_state } => {
                if !return_last_state {
                    return Err(Error::InvalidConfig(
                        "only last-state LSTM output is supported".into(),
                    ));
                }
                Ok(Layer::Lstm(Lstm::new(*input_dim, *hidden_units, rng)?))
            }
            LayerSpec::Conv1d { in_channels, filters, kernel_size, activation } => Ok(Layer::Conv1d(
                Conv1d::new(*in_channels, *filters, *kernel_size, *activation, rng)?,
            )),
            LayerSpec::Dropout { rate } => Ok(Layer::Dropout(Dropout::new(*rate)?)),
            LayerSpec::GlobalAvgPool { channels } => {
                Ok(Layer::GlobalAvgPool(GlobalAvgPool::new(*channels)?))
            }
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                in_dim: d.in_dim,
                out_dim: d.out_dim,
                activation: d.activation,
            },
            Layer::Lstm(l) => LayerSpec::Lstm {
                input_dim: l.input_dim,
                hidden_units: l.hidden,
                return_last_state: true,
            },
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                in_channels: c.in_channels,
                filters: c.filters,
                kernel_size: c.kernel,
                activation: c.activation,
            },
            Layer::Dropout(d) => LayerSpec::Dropout { rate: d.rate },
            Layer::GlobalAvgPool(p) => LayerSpec::GlobalAvgPool {
                channels: p.channels,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Lstm(_) => "lstm",
            Layer::Conv1d(_) => "conv1d",
            Layer::Dropout(_) => "dropout",
            Layer::GlobalAvgPool(_) => "global_avg_pool",
        }
    }

    pub fn out_shape(&self, in_shape: Shape) -> Result<Shape> {
        match (self, in_shape) {
            (Layer::Dense(d), Shape::Vector(n)) if n == d.in_dim => Ok(Shape::Vector(d.out_dim)),
            (Layer::Lstm(l), Shape::Seq { len, channels })
                if channels == l.input_dim && len >= 1 =>
            {
                Ok(Shape::Vector(l.hidden))
            }
            (Layer::Conv1d(c), Shape::Seq { len, channels })
                if channels == c.in_channels && len >= c.kernel =>
            {
                Ok(Shape::Seq {
                    len: len - c.kernel + 1,
                    channels: c.filters,
                })
            }
            (Layer::Dropout(_), shape) => Ok(shape),
            (Layer::GlobalAvgPool(p), Shape::Seq { channels, .. }) if channels == p.channels => {
                Ok(Shape::Vector(channels))
            }
            (layer, shape) => Err(Error::ShapeMismatch(format!(
                "{} cannot consume shape {shape}",
                layer.kind_name()
            ))),
        }
    }

    pub fn forward_train(&mut self, input: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            Layer::Dense(d) => {
                d.cache_in.clear();
                d.cache_in.extend_from_slice(input);
                let mut out = Vec::new();
                d.run(input, &mut out);
                d.cache_out = out.clone();
                Ok(out)
            }
            Layer::Lstm(l) => l.run(input, true),
            Layer::Conv1d(c) => {
                let mut out = Vec::new();
                let t_in = {
                    let t_out = c.run(input, &mut out)?;
                    t_out + c.kernel - 1
                };
                c.cache_in.clear();
                c.cache_in.extend_from_slice(input);
                c.cache_out = out.clone();
                c.cache_steps = t_in;
                Ok(out)
            }
            Layer::Dropout(d) => Ok(d.forward_train(input, rng)),
            Layer::GlobalAvgPool(p) => {
                let steps = pool_steps(input.len(), p.channels)?;
                p.cache_steps = steps;
                Ok(pool_forward(input, steps, p.channels))
            }
        }
    }

    pub fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>> {
        match self {
            Layer::Dense(d) => {
                if d.cache_in.len() != d.in_dim {
                    return Err(Error::MissingForward);
                }
                if grad_out.len() != d.out_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "dense gradient length {} expected {}",
                        grad_out.len(),
                        d.out_dim
                    )));
                }
                let mut dx = vec![0.0; d.in_dim];
                for i in 0..d.out_dim {
                    let dz = grad_out[i] * d.activation.deriv_from_output(d.cache_out[i]);
                    if dz == 0.0 {
                        continue;
                    }
                    d.db[i] += dz;
                    let wrow = &d.w[i * d.in_dim..(i + 1) * d.in_dim];
                    let dwrow = &mut d.dw[i * d.in_dim..(i + 1) * d.in_dim];
                    for j in 0..d.in_dim {
                        dwrow[j] += dz * d.cache_in[j];
                        dx[j] += dz * wrow[j];
                    }
                }
                Ok(dx)
            }
            Layer::Lstm(l) => l.backward(grad_out),
            Layer::Conv1d(c) => c.backward(grad_out),
            Layer::Dropout(d) => {
                if d.mask.len() != grad_out.len() {
                    return Err(Error::MissingForward);
                }
                Ok(grad_out.iter().zip(&d.mask).map(|(g, m)| g * m).collect())
            }
            Layer::GlobalAvgPool(p) => {
                if p.cache_steps == 0 {
                    return Err(Error::MissingForward);
                }
                if grad_out.len() != p.channels {
                    return Err(Error::ShapeMismatch(format!(
                        "pool gradient length {} expected {}",
                        grad_out.len(),
                        p.channels
                    )));
                }
                let scale = 1.0 / p.cache_steps as f64;
                let mut dx = Vec::with_capacity(p.cache_steps * p.channels);
                for _ in 0..p.cache_steps {
                    dx.extend(grad_out.iter().map(|g| g * scale));
                }
                Ok(dx)
            }
        }
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        match self {
            Layer::Dense(d) => {
                if input.len() != d.in_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "dense input length {} expected {}",
                        input.len(),
                        d.in_dim
                    )));
                }
                let mut out = Vec::new();
                d.run(input, &mut out);
                Ok(out)
            }
            Layer::Lstm(l) => {
                // Eval pass still unrolls the recurrence, but caches nothing.
                let mut scratch = l.clone_without_caches();
                scratch.run(input, false)
            }
            Layer::Conv1d(c) => {
                let mut out = Vec::new();
                c.run(input, &mut out)?;
                Ok(out)
            }
            Layer::Dropout(_) => Ok(input.to_vec()),
            Layer::GlobalAvgPool(p) => {
                let steps = pool_steps(input.len(), p.channels)?;
                Ok(pool_forward(input, steps, p.channels))
            }
        }
    }

    pub fn zero_grads(&mut self) {
        match self {
            Layer::Dense(d) => {
                d.dw.iter_mut().for_each(|v| *v = 0.0);
                d.db.iter_mut().for_each(|v| *v = 0.0);
            }
            Layer::Lstm(l) => {
                for g in 0..4 {
                    l.dw[g].iter_mut().for_each(|v| *v = 0.0);
                    l.du[g].iter_mut().for_each(|v| *v = 0.0);
                    l.db[g].iter_mut().for_each(|v| *v = 0.0);
                }
            }
            Layer::Conv1d(c) => {
                c.dw.iter_mut().for_each(|v| *v = 0.0);
                c.db.iter_mut().for_each(|v| *v = 0.0);
            }
            Layer::Dropout(_) | Layer::GlobalAvgPool(_) => {}
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.w.len() + d.b.len(),
            Layer::Lstm(l) => 4 * (l.w[0].len() + l.u[0].len() + l.b[0].len()),
            Layer::Conv1d(c) => c.w.len() + c.b.len(),
            Layer::Dropout(_) | Layer::GlobalAvgPool(_) => 0,
        }
    }

    pub(crate) fn collect_param_blocks<'a>(
        &'a mut self,
        blocks: &mut Vec<(&'a mut Vec<f64>, &'a mut Vec<f64>)>,
    ) {
        match self {
            Layer::Dense(d) => {
                blocks.push((&mut d.w, &mut d.dw));
                blocks.push((&mut d.b, &mut d.db));
            }
            Layer::Lstm(l) => {
                for ((w, dw), (u, du)) in l
                    .w
                    .iter_mut()
                    .zip(l.dw.iter_mut())
                    .zip(l.u.iter_mut().zip(l.du.iter_mut()))
                {
                    blocks.push((w, dw));
                    blocks.push((u, du));
                }
                for (b, db) in l.b.iter_mut().zip(l.db.iter_mut()) {
                    blocks.push((b, db));
                }
            }
            Layer::Conv1d(c) => {
                blocks.push((&mut c.w, &mut c.dw));
                blocks.push((&mut c.b, &mut c.db));
            }
            Layer::Dropout(_) | Layer::GlobalAvgPool(_) => {}
        }
    }

    /// Logical `(rows, cols)` of each parameter block, matching the order of
    /// [`Layer::collect_param_blocks`].
    pub fn param_block_shapes(&self) -> Vec<(usize, usize)> {
        match self {
            Layer::Dense(d) => vec![(d.out_dim, d.in_dim), (1, d.out_dim)],
            Layer::Lstm(l) => {
                let mut shapes = Vec::with_capacity(12);
                for _ in 0..4 {
                    shapes.push((l.hidden, l.input_dim));
                    shapes.push((l.hidden, l.hidden));
                }
                for _ in 0..4 {
                    shapes.push((1, l.hidden));
                }
                shapes
            }
            Layer::Conv1d(c) => vec![(c.filters, c.kernel * c.in_channels), (1, c.filters)],
            Layer::Dropout(_) | Layer::GlobalAvgPool(_) => Vec::new(),
        }
    }
}

impl Lstm {
    fn clone_without_caches(&self) -> Lstm {
        let mut copy = self.clone();
        copy.cache_x.clear();
        for g in &mut copy.cache_gates {
            g.clear();
        }
        copy.cache_c.clear();
        copy.cache_h.clear();
        copy.cache_tanh_c.clear();
        copy.cache_steps = 0;
        copy
    }
}

fn pool_steps(input_len: usize, channels: usize) -> Result<usize> {
    if input_len == 0 || input_len % channels != 0 {
        return Err(Error::ShapeMismatch(format!(
            "pool input length {input_len} is not a multiple of {channels} channels"
        )));
    }
    Ok(input_len / channels)
}

fn pool_forward(input: &[f64], steps: usize, channels: usize) -> Vec<f64> {
    let mut out = vec![0.0; channels];
    for t in 0..steps {
        for c in 0..channels {
            out[c] += input[t * channels + c];
        }
    }
    let scale = 1.0 / steps as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Network, Shape};
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(77)
    }

    #[test]
    fn identity_dense_passes_input_through() {
        let mut r = rng();
        let mut dense = Dense::new(2, 2, Activation::Linear, &mut r).unwrap();
        dense.w.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        dense.b.copy_from_slice(&[0.0, 0.0]);
        let mut net = Network::new(Shape::Vector(2), vec![Layer::Dense(dense)], 0).unwrap();
        assert_eq!(net.predict(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(net.forward_train(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut r = rng();
        let mut dense = Dense::new(2, 2, Activation::Relu, &mut r).unwrap();
        dense.w.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        dense.b.copy_from_slice(&[0.0, 0.0]);
        let net = Network::new(Shape::Vector(2), vec![Layer::Dense(dense)], 0).unwrap();
        assert_eq!(net.predict(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn zero_parameter_lstm_outputs_zero() {
        let mut r = rng();
        let lstm = Lstm::new(2, 3, &mut r).unwrap();
        let mut net = Network::new(
            Shape::Seq { len: 5, channels: 2 },
            vec![Layer::Lstm(lstm)],
            0,
        )
        .unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        let out = net.predict(&[0.4, -0.7, 1.2, 0.3, -0.5, 0.9, 0.1, 0.2, 0.6, -0.2]).unwrap();
        for v in out {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn conv_shape_and_known_kernel() {
        let mut r = rng();
        let mut conv = Conv1d::new(1, 1, 3, Activation::Linear, &mut r).unwrap();
        // Moving sum over 3 steps.
        conv.w.copy_from_slice(&[1.0, 1.0, 1.0]);
        conv.b.copy_from_slice(&[0.0]);
        let net = Network::new(Shape::Seq { len: 5, channels: 1 }, vec![Layer::Conv1d(conv)], 0).unwrap();
        assert_eq!(net.out_shape(), Shape::Seq { len: 3, channels: 1 });
        let out = net.predict(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(out, vec![6.0, 9.0, 12.0]);
    }

    #[test]
    fn pool_averages_over_time() {
        let pool = GlobalAvgPool::new(2).unwrap();
        let net = Network::new(
            Shape::Seq { len: 3, channels: 2 },
            vec![Layer::GlobalAvgPool(pool)],
            0,
        )
        .unwrap();
        let out = net.predict(&[1.0, 10.0, 2.0, 20.0, 3.0, 30.0]).unwrap();
        assert_eq!(out, vec![2.0, 20.0]);
    }

    #[test]
    fn dropout_eval_equals_mean_train_output() {
        // Inverted dropout: averaging many masked train outputs recovers the
        // eval output within Monte-Carlo error.
        let mut r = rng();
        let mut drop = Dropout::new(0.3).unwrap();
        let input = vec![1.0, -2.0, 0.5, 3.0];
        let mut mean = vec![0.0; 4];
        let n = 10_000usize;
        for _ in 0..n {
            let out = drop.forward_train(&input, &mut r);
            for (m, o) in mean.iter_mut().zip(out) {
                *m += o;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for (m, x) in mean.iter().zip(&input) {
            assert!(
                (m - x).abs() <= 0.02 * x.abs().max(1.0),
                "MC mean {m} vs eval {x}"
            );
        }
    }

    #[test]
    fn dropout_rate_bounds_enforced() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
        assert!(Dropout::new(0.0).is_ok());
        assert!(Dropout::new(0.99).is_ok());
    }

    #[test]
    fn incompatible_stack_rejected() {
        let mut r = rng();
        let dense = Dense::new(4, 2, Activation::Linear, &mut r).unwrap();
        // Vector(3) into a dense expecting 4 inputs.
        assert!(Network::new(Shape::Vector(3), vec![Layer::Dense(dense)], 0).is_err());
        let conv = Conv1d::new(2, 3, 5, Activation::Relu, &mut r).unwrap();
        // Sequence shorter than the kernel.
        assert!(Network::new(
            Shape::Seq { len: 4, channels: 2 },
            vec![Layer::Conv1d(conv)],
            0
        )
        .is_err());
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut r = rng();
        let dense = Dense::new(2, 2, Activation::Linear, &mut r).unwrap();
        let mut net = Network::new(Shape::Vector(2), vec![Layer::Dense(dense)], 0).unwrap();
        assert!(net.backward(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn spec_round_trip_preserves_architecture() {
        let shape = Shape::Seq { len: 10, channels: 3 };
        let specs = vec![
            LayerSpec::Conv1d {
                in_channels: 3,
                filters: 8,
                kernel_size: 3,
                activation: Activation::Relu,
            },
            LayerSpec::Dropout { rate: 0.3 },
            LayerSpec::GlobalAvgPool { channels: 8 },
            LayerSpec::Dense {
                in_dim: 8,
                out_dim: 7,
                activation: Activation::Linear,
            },
        ];
        let mut net = Network::from_specs(shape, &specs, 5).unwrap();
        assert_eq!(net.specs(), specs);
        let mut rebuilt = Network::from_specs(shape, &net.specs(), 5).unwrap();
        assert_eq!(rebuilt.param_count(), net.param_count());
        // Same seed, same spec: identical fresh weights.
        assert_eq!(rebuilt.params_flat(), net.params_flat());
    }

    #[test]
    fn param_count_matches_block_shapes() {
        let mut r = rng();
        let layers = vec![
            Layer::Lstm(Lstm::new(3, 4, &mut r).unwrap()),
            Layer::Dense(Dense::new(4, 2, Activation::Linear, &mut r).unwrap()),
        ];
        let net = Network::new(Shape::Seq { len: 5, channels: 3 }, layers, 0).unwrap();
        let by_shapes: usize = net
            .layers
            .iter()
            .flat_map(Layer::param_block_shapes)
            .map(|(r, c)| r * c)
            .sum();
        assert_eq!(by_shapes, net.param_count());
        // 4 gates x (4x3 kernel + 4x4 recurrent + 4 bias) + dense 4x2 + 2.
        assert_eq!(net.param_count(), 4 * (12 + 16 + 4) + 8 + 2);
    }
}
