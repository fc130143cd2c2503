use rand::Rng;

use super::tensor::Tensor;
use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// Weight matrix, shape [out, in], row-major.
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }
}

/// A multi-layer perceptron over f64 vectors.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer intermediates cached by a forward pass, sufficient to run the
/// reverse pass. One entry per primitive (layer) in evaluation order.
#[derive(Debug, Clone, Default)]
pub struct GradTape {
    entries: Vec<TapeEntry>,
}

#[derive(Debug, Clone)]
struct TapeEntry {
    input: Vec<f64>,
    preact: Vec<f64>,
}

impl GradTape {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parameter gradients mirroring an `Mlp`'s shapes.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            for x in w {
                *x *= s;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= s;
            }
        }
    }

    /// Flat view in the same order as `Mlp::flatten`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

impl Mlp {
    /// Builds an MLP with the given layer widths and per-layer activations.
    /// Weights are uniform in ±√(6/(fan_in+fan_out)), biases zero.
    pub fn new(widths: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 2 {
            return Err(contract("mlp needs at least input and output widths"));
        }
        if activations.len() != widths.len() - 1 {
            return Err(contract("one activation per layer required"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(contract("layer widths must be positive"));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (widths[i], widths[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            layers.push(Layer {
                weight: Tensor::new(vec![fan_out, fan_in], data)?,
                bias: vec![0.0; fan_out],
                activation: act,
            });
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Forward pass recording a tape for the reverse pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, GradTape)> {
        if input.len() != self.input_dim() {
            return Err(contract(format!(
                "mlp input width {} != expected {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut tape = GradTape::default();
        let mut x = input.to_vec();
        for layer in &self.layers {
            let (out_d, in_d) = (layer.out_dim(), layer.in_dim());
            let mut pre = layer.bias.clone();
            for o in 0..out_d {
                let row = &layer.weight.data[o * in_d..(o + 1) * in_d];
                pre[o] += super::tensor::dot(row, &x);
            }
            let next: Vec<f64> = pre.iter().map(|&p| layer.activation.apply(p)).collect();
            tape.entries.push(TapeEntry { input: x, preact: pre });
            x = next;
        }
        Ok((x, tape))
    }

    /// Forward pass without taping.
    pub fn forward_nograd(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Reverse pass over a tape produced by `forward` on this net. Returns
    /// parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, tape: &GradTape, output_grad: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        if tape.len() != self.layers.len() {
            return Err(contract(format!(
                "tape length {} != layer count {}",
                tape.len(),
                self.layers.len()
            )));
        }
        if output_grad.len() != self.output_dim() {
            return Err(contract(format!(
                "output grad width {} != {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut g = output_grad.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let entry = &tape.entries[idx];
            let (out_d, in_d) = (layer.out_dim(), layer.in_dim());
            let mut d_pre = vec![0.0; out_d];
            for o in 0..out_d {
                d_pre[o] = g[o] * layer.activation.derivative(entry.preact[o]);
            }
            let wg = &mut grads.weights[idx];
            for o in 0..out_d {
                let base = o * in_d;
                for i in 0..in_d {
                    wg[base + i] += d_pre[o] * entry.input[i];
                }
                grads.biases[idx][o] += d_pre[o];
            }
            let mut g_in = vec![0.0; in_d];
            for o in 0..out_d {
                let row = &layer.weight.data[o * in_d..(o + 1) * in_d];
                for i in 0..in_d {
                    g_in[i] += row[i] * d_pre[o];
                }
            }
            g = g_in;
        }
        Ok((grads, g))
    }

    /// Gradient of `dot(output_grad, output)` with respect to the input only.
    pub fn input_grad(&self, input: &[f64], output_grad: &[f64]) -> Result<Vec<f64>> {
        let (_, tape) = self.forward(input)?;
        Ok(self.backward(&tape, output_grad)?.1)
    }

    /// All parameters in layer order, weights then bias per layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weight.data);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(contract(format!(
                "flat parameter vector length {} != {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            let wn = l.weight.len();
            l.weight.data.copy_from_slice(&flat[pos..pos + wn]);
            pos += wn;
            let bn = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + bn]);
            pos += bn;
        }
        Ok(())
    }
}
