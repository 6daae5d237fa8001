//! Feed-forward networks with hand-written backpropagation.
//!
//! Networks are tiny, so everything is plain `Vec<f64>` arithmetic. Hidden
//! layers use `tanh` or ReLU; the output layer is always affine and is read
//! either as a single logit or as a vector of outputs.

mod gradcheck;
mod loss;
mod optim;

pub use gradcheck::{finite_difference_error, grad_check};
pub use loss::{bce_loss, sigmoid, softplus, weighted_bce_grad, Example};
pub use optim::{step, OptimizerKind, OptimizerState};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// One output read as a logit.
    Logit,
    /// Vector of affine outputs (class logits, or generated coordinates).
    Logits,
}

/// Affine layer `y = W x + b`, `W` stored row-major with `rows = out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(i, b)| {
            let row = &self.weights[i * self.cols..(i + 1) * self.cols];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MlpParams {
    pub sizes: Vec<usize>,
    /// One entry per hidden layer.
    pub activations: Vec<Activation>,
    pub head: Head,
    pub layers: Vec<Dense>,
}

#[derive(Deserialize)]
struct RawParams {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    head: Head,
    layers: Vec<Dense>,
}

impl TryFrom<RawParams> for MlpParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        let params = MlpParams {
            sizes: raw.sizes,
            activations: raw.activations,
            head: raw.head,
            layers: raw.layers,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Per-layer outputs of one forward pass; `outputs[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    outputs: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("trace has at least the input")
    }
}

/// Gradients with the same layout as [`MlpParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params.layers.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= c);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Weights `~ N(0, 1/fan_in)`, biases zero.
pub fn init(sizes: &[usize], activation: Activation, seed: u64) -> Result<MlpParams> {
    if sizes.len() < 2 {
        return Err(invalid("sizes", "need at least input and output sizes"));
    }
    if sizes.contains(&0) {
        return Err(invalid("sizes", "zero-sized layer"));
    }
    let mut r = rng::stream(seed, streams::NET_INIT);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r))
                .collect();
            Dense {
                rows: fan_out,
                cols: fan_in,
                weights,
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    let head = if sizes[sizes.len() - 1] == 1 {
        Head::Logit
    } else {
        Head::Logits
    };
    Ok(MlpParams {
        sizes: sizes.to_vec(),
        activations: vec![activation; sizes.len() - 2],
        head,
        layers,
    })
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || self.sizes.contains(&0) {
            return Err(invalid("sizes", "need at least two positive sizes"));
        }
        if self.layers.len() != self.sizes.len() - 1 || self.activations.len() != self.sizes.len() - 2 {
            return Err(invalid("layers", "layer and activation counts do not match sizes"));
        }
        for (l, w) in self.layers.iter().zip(self.sizes.windows(2)) {
            if l.cols != w[0] || l.rows != w[1] || l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(invalid("layers", "layer dimensions do not chain"));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        if self.head == Head::Logit && self.output_dim() != 1 {
            return Err(invalid("head", "logit head needs a single output"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_from_slice(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Mutable access to the `index`-th parameter in flattened order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            let n = l.weights.len();
            if index < n {
                return &mut l.weights[index];
            }
            index -= n;
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.rows);
            layer.apply(outputs.last().expect("non-empty"), &mut out);
            if let Some(act) = self.activations.get(i) {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            outputs.push(out);
        }
        Ok(Trace { outputs })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if let Some(act) = self.activations.get(i) {
                next.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Scalar output of a logit-head network.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(invalid("head", "network has more than one output"));
        }
        Ok(self.forward(x)?[0])
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂output` and returns
    /// `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, d_output: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let mut delta = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.outputs[l];
            let g = &mut grads.layers[l];
            for (i, &di) in delta.iter().enumerate() {
                g.bias[i] += di;
                let row = &mut g.weights[i * layer.cols..(i + 1) * layer.cols];
                row.iter_mut().zip(input).for_each(|(gw, v)| *gw += di * v);
            }
            let mut d_in = vec![0.0; layer.cols];
            for (i, &di) in delta.iter().enumerate() {
                let row = &layer.weights[i * layer.cols..(i + 1) * layer.cols];
                d_in.iter_mut().zip(row).for_each(|(d, w)| *d += w * di);
            }
            if l > 0 {
                let act = self.activations[l - 1];
                d_in.iter_mut()
                    .zip(input)
                    .for_each(|(d, h)| *d *= act.derivative_from_output(*h));
            }
            delta = d_in;
        }
        delta
    }
}
