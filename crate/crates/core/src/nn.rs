//! Fully connected feed-forward classifier with leaky-ReLU hidden layers and
//! a softmax output, trained on cross-entropy. Shared by the MLP baseline and
//! the fine-tuning phase of the stacked autoencoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::{Adam, AdamConfig, Moments};
use crate::rng::SeededRng;

/// Affine map `y = W x + b` with `W` stored row-major as `output_dim × input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform(input_dim: usize, output_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.uniform_in(-bound, bound))
            .collect();
        let bias = (0..output_dim).map(|_| rng.uniform_in(-bound, bound)).collect();
        Self {
            input_dim,
            output_dim,
            weights,
            bias,
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.input_dim).zip(&self.bias).map(
            |(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>(),
        ));
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_dim);
        self.apply(x, &mut out);
        out
    }

    pub fn weight_norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Accumulates `dW += delta xᵀ`, `db += delta` and writes `Wᵀ delta` into `back`.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        delta: &[f64],
        grad: &mut DenseGrad,
        back: Option<&mut Vec<f64>>,
    ) {
        for (o, &d) in delta.iter().enumerate() {
            grad.bias[o] += d;
            let row = &mut grad.weights[o * self.input_dim..(o + 1) * self.input_dim];
            for (g, v) in row.iter_mut().zip(x) {
                *g += d * v;
            }
        }
        if let Some(back) = back {
            back.clear();
            back.resize(self.input_dim, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                let row = &self.weights[o * self.input_dim..(o + 1) * self.input_dim];
                for (b, w) in back.iter_mut().zip(row) {
                    *b += d * w;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &Dense) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|g| *g *= s);
        self.bias.iter_mut().for_each(|g| *g *= s);
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-Σ y_i ln ŷ_i` for a one-hot target `class`, computed from logits.
pub fn cross_entropy_from_logits(z: &[f64], class: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - z[class]
}

/// `-Σ y_i ln ŷ_i` for probability vectors.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> f64 {
    -target
        .iter()
        .zip(predicted)
        .filter(|(&y, _)| y != 0.0)
        .map(|(y, p)| y * p.ln())
        .sum::<f64>()
}

/// Two-class decision from softmax outputs: argmax, exact ties go to class 1.
pub fn argmax_label(probs: &[f64]) -> u8 {
    u8::from(probs[1] >= probs[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForward {
    pub layers: Vec<Dense>,
    /// Negative-side slope of the hidden activation; 0 gives plain ReLU.
    pub hidden_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl FeedForward {
    pub fn new(layers: Vec<Dense>, hidden_slope: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layer list"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output_dim,
                    got: pair[1].input_dim,
                });
            }
        }
        Ok(Self {
            layers,
            hidden_slope,
        })
    }

    pub fn random(dims: &[usize], hidden_slope: f64, rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs at least input and output dims".into(),
            ));
        }
        let layers = dims
            .windows(2)
            .map(|w| Dense::uniform(w[0], w[1], rng))
            .collect();
        Self::new(layers, hidden_slope)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim)
    }

    /// Pre-activations of every layer; the last entry holds the logits.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut act = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&act);
            if l + 1 < self.layers.len() {
                act = z.iter().map(|&v| leaky_relu(v, self.hidden_slope)).collect();
            }
            pre.push(z);
        }
        pre
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.trace(x).pop().unwrap_or_default())
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(argmax_label(&self.probabilities(x)?))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Mean cross-entropy over the rows at `indices`.
    pub fn loss(&self, x: &Matrix, y: &[u8], indices: &[usize]) -> f64 {
        let total: f64 = indices
            .iter()
            .map(|&i| {
                let logits = self.trace(x.row(i)).pop().unwrap_or_default();
                cross_entropy_from_logits(&logits, usize::from(y[i]))
            })
            .sum();
        total / indices.len() as f64
    }

    /// Mean cross-entropy and its gradient over the rows at `indices`.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[u8], indices: &[usize]) -> (f64, Vec<DenseGrad>) {
        let mut grads: Vec<DenseGrad> = self.layers.iter().map(DenseGrad::zeros_like).collect();
        let mut total = 0.0;
        let mut back = Vec::new();
        for &i in indices {
            let xi = x.row(i);
            let pre = self.trace(xi);
            let class = usize::from(y[i]);
            let logits = &pre[pre.len() - 1];
            total += cross_entropy_from_logits(logits, class);

            let mut delta = softmax(logits);
            delta[class] -= 1.0;
            for l in (0..self.layers.len()).rev() {
                let input: Vec<f64> = if l == 0 {
                    xi.to_vec()
                } else {
                    pre[l - 1]
                        .iter()
                        .map(|&v| leaky_relu(v, self.hidden_slope))
                        .collect()
                };
                let want_back = l > 0;
                self.layers[l].backward(
                    &input,
                    &delta,
                    &mut grads[l],
                    want_back.then_some(&mut back),
                );
                if want_back {
                    delta = back
                        .iter()
                        .zip(&pre[l - 1])
                        .map(|(b, &z)| b * leaky_relu_grad(z, self.hidden_slope))
                        .collect();
                }
            }
        }
        let scale = 1.0 / indices.len() as f64;
        grads.iter_mut().for_each(|g| g.scale(scale));
        (total * scale, grads)
    }

    /// Mini-batch Adam on cross-entropy. Rows are reshuffled every epoch.
    /// Returns the mean training loss of each epoch.
    pub fn fit(
        &mut self,
        x: &Matrix,
        y: &[u8],
        config: &FitConfig,
        rng: &mut SeededRng,
    ) -> Result<Vec<f64>> {
        if x.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.rows(),
                right: y.len(),
            });
        }
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if config.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        let mut adam = Adam::new(config.adam);
        let mut moments: Vec<(Moments, Moments)> = self
            .layers
            .iter()
            .map(|l| (Moments::new(l.weights.len()), Moments::new(l.bias.len())))
            .collect();
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut history = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                let (loss, grads) = self.loss_and_grad(x, y, batch);
                epoch_loss += loss * batch.len() as f64;
                adam.begin_step();
                for ((layer, grad), (mw, mb)) in
                    self.layers.iter_mut().zip(&grads).zip(&mut moments)
                {
                    adam.apply(mw, &mut layer.weights, &grad.weights);
                    adam.apply(mb, &mut layer.bias, &grad.bias);
                }
            }
            history.push(epoch_loss / x.rows() as f64);
        }
        Ok(history)
    }

    /// All weights then biases, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }
}

/// Flattens gradients in the order of [`FeedForward::flat_params`].
pub fn flatten_grads(grads: &[DenseGrad]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
        .collect()
}
