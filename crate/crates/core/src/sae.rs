//! Stacked autoencoder classifier.
//!
//! Each autoencoder has a leaky-ReLU encoder and a linear decoder and is
//! pretrained greedily with momentum SGD on
//!
//! ```text
//! J = (1/M) sum_d ½ ||x_d - x̂_d||² + (λ/2) sum w²
//! ```
//!
//! where the penalty covers encoder and decoder weights but not biases. The
//! encoders are then chained, a softmax head is attached and the whole
//! network is fine-tuned with Adam on cross-entropy.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    argmax_label, leaky_relu, leaky_relu_grad, softmax, Dense, DenseGrad, FeedForward, FitConfig,
};
use crate::optim::{AdamConfig, Momentum};
use crate::rng::{derive_seed, SeededRng};

pub const DEFAULT_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderLayer {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub encoder: Dense,
    pub decoder: Dense,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeGrad {
    pub encoder: DenseGrad,
    pub decoder: DenseGrad,
}

impl AutoencoderLayer {
    pub fn random(input_dim: usize, hidden_dim: usize, slope: f64, rng: &mut SeededRng) -> Result<Self> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::OutOfRange {
                name: "slope",
                value: slope.to_string(),
                range: "(0, 1)".into(),
            });
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            encoder: Dense::uniform(input_dim, hidden_dim, rng),
            decoder: Dense::uniform(hidden_dim, input_dim, rng),
            slope,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.encoder.forward(x);
        h.iter_mut().for_each(|v| *v = leaky_relu(*v, self.slope));
        h
    }

    pub fn decode(&self, h: &[f64]) -> Vec<f64> {
        self.decoder.forward(h)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        self.decode(&self.encode(x))
    }

    pub fn encode_all(&self, x: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.encode(r)).collect();
        Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, self.hidden_dim))
    }

    fn l2(&self) -> f64 {
        self.encoder.weight_norm_sq() + self.decoder.weight_norm_sq()
    }

    /// Loss and gradient over the rows at `indices`.
    pub fn loss_and_grad(&self, x: &Matrix, indices: &[usize], lambda: f64) -> (f64, AeGrad) {
        let mut enc = DenseGrad::zeros_like(&self.encoder);
        let mut dec = DenseGrad::zeros_like(&self.decoder);
        let inv_m = 1.0 / indices.len() as f64;
        let mut mse = 0.0;
        let mut back = Vec::new();
        for &i in indices {
            let xi = x.row(i);
            let z = self.encoder.forward(xi);
            let h: Vec<f64> = z.iter().map(|&v| leaky_relu(v, self.slope)).collect();
            let out = self.decoder.forward(&h);
            let resid: Vec<f64> = out.iter().zip(xi).map(|(o, v)| o - v).collect();
            mse += 0.5 * resid.iter().map(|r| r * r).sum::<f64>();
            let d_out: Vec<f64> = resid.iter().map(|r| r * inv_m).collect();
            self.decoder.backward(&h, &d_out, &mut dec, Some(&mut back));
            let d_z: Vec<f64> = back
                .iter()
                .zip(&z)
                .map(|(b, &zv)| b * leaky_relu_grad(zv, self.slope))
                .collect();
            self.encoder.backward(xi, &d_z, &mut enc, None);
        }
        for (g, w) in enc.weights.iter_mut().zip(&self.encoder.weights) {
            *g += lambda * w;
        }
        for (g, w) in dec.weights.iter_mut().zip(&self.decoder.weights) {
            *g += lambda * w;
        }
        let loss = mse * inv_m + 0.5 * lambda * self.l2();
        (loss, AeGrad { encoder: enc, decoder: dec })
    }

    fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.encoder.weights,
            &mut self.encoder.bias,
            &mut self.decoder.weights,
            &mut self.decoder.bias,
        ]
    }

    /// Encoder weights, encoder bias, decoder weights, decoder bias.
    pub fn flat_params(&self) -> Vec<f64> {
        self.encoder
            .weights
            .iter()
            .chain(&self.encoder.bias)
            .chain(&self.decoder.weights)
            .chain(&self.decoder.bias)
            .copied()
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for v in self.params_mut() {
            for p in v.iter_mut() {
                *p = it.next().expect("parameter vector too short");
            }
        }
    }
}

impl AeGrad {
    pub fn flatten(&self) -> Vec<f64> {
        self.encoder
            .weights
            .iter()
            .chain(&self.encoder.bias)
            .chain(&self.decoder.weights)
            .chain(&self.decoder.bias)
            .copied()
            .collect()
    }
}

/// `(1/M) sum ½ ||x - decode(encode(x))||² + (λ/2) sum w²` over every row of `batch`.
pub fn ae_loss(layer: &AutoencoderLayer, batch: &Matrix, lambda: f64) -> Result<f64> {
    if batch.cols() != layer.input_dim {
        return Err(Error::DimensionMismatch {
            expected: layer.input_dim,
            got: batch.cols(),
        });
    }
    if batch.rows() == 0 {
        return Ok(0.5 * lambda * layer.l2());
    }
    let mse: f64 = batch
        .iter_rows()
        .map(|x| {
            let r = layer.reconstruct(x);
            0.5 * r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    Ok(mse / batch.rows() as f64 + 0.5 * lambda * layer.l2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeTrainConfig {
    pub hidden_dims: Vec<usize>,
    pub slope: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub fine_tune: FitConfig,
}

impl Default for SaeTrainConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![20, 15, 8],
            slope: DEFAULT_SLOPE,
            learning_rate: 0.008,
            momentum: 0.9,
            l2_lambda: 0.001,
            epochs: 250,
            batch_size: 128,
            fine_tune: FitConfig {
                epochs: 250,
                batch_size: 128,
                adam: AdamConfig::default(),
            },
        }
    }
}

impl SaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning rate", self.learning_rate),
            ("momentum", self.momentum),
            ("fine-tune learning rate", self.fine_tune.adam.learning_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.l2_lambda < 0.0 {
            return Err(Error::InvalidParameter("l2 lambda must be non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.fine_tune.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch sizes must be positive".into(),
            ));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidParameter("hidden dims must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// Momentum SGD on [`ae_loss`] over shuffled mini-batches. Returns the trained
/// layer and the mean loss of each epoch.
pub fn pretrain_layer(
    layer: &AutoencoderLayer,
    inputs: &Matrix,
    config: &SaeTrainConfig,
    rng: &mut SeededRng,
) -> Result<(AutoencoderLayer, Vec<f64>)> {
    if inputs.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if inputs.cols() != layer.input_dim {
        return Err(Error::DimensionMismatch {
            expected: layer.input_dim,
            got: inputs.cols(),
        });
    }
    let opt = Momentum {
        learning_rate: config.learning_rate,
        momentum: config.momentum,
    };
    let mut layer = layer.clone();
    let mut velocity: Vec<Vec<f64>> = layer.params_mut().iter().map(|p| vec![0.0; p.len()]).collect();
    let mut order: Vec<usize> = (0..inputs.rows()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, g) = layer.loss_and_grad(inputs, batch, config.l2_lambda);
            epoch += loss * batch.len() as f64;
            let grads = [&g.encoder.weights, &g.encoder.bias, &g.decoder.weights, &g.decoder.bias];
            for ((p, v), g) in layer.params_mut().into_iter().zip(&mut velocity).zip(grads) {
                opt.apply(v, p, g);
            }
        }
        history.push(epoch / inputs.rows() as f64);
    }
    Ok((layer, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedAutoencoder {
    pub encoders: Vec<Dense>,
    pub head: Dense,
    pub slope: f64,
}

impl StackedAutoencoder {
    pub fn input_dim(&self) -> usize {
        self.encoders.first().map_or(self.head.input_dim, |e| e.input_dim)
    }

    /// Encoders followed by the head as one feed-forward network.
    pub fn to_network(&self) -> FeedForward {
        let mut layers = self.encoders.clone();
        layers.push(self.head.clone());
        FeedForward {
            layers,
            hidden_slope: self.slope,
        }
    }

    fn from_network(mut net: FeedForward) -> Self {
        let head = net.layers.pop().expect("network has a head");
        Self {
            encoders: net.layers,
            head,
            slope: net.hidden_slope,
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.to_network().probabilities(x)
    }

    /// Argmax of the softmax head; exact ties go to label 1.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut act = x.to_vec();
        for enc in &self.encoders {
            act = enc.forward(&act);
            act.iter_mut().for_each(|v| *v = leaky_relu(*v, self.slope));
        }
        Ok(argmax_label(&softmax(&self.head.forward(&act))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeHistory {
    pub pretrain: Vec<Vec<f64>>,
    pub fine_tune: Vec<f64>,
}

/// Greedy layer-wise pretraining followed by supervised fine-tuning.
pub fn fit(
    x: &Matrix,
    y: &[u8],
    config: &SaeTrainConfig,
    seed: u64,
) -> Result<(StackedAutoencoder, SaeHistory)> {
    config.validate()?;
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    let mut encoders = Vec::with_capacity(config.hidden_dims.len());
    let mut pretrain = Vec::with_capacity(config.hidden_dims.len());
    let mut inputs = x.clone();
    for (l, &hidden) in config.hidden_dims.iter().enumerate() {
        let mut rng = SeededRng::new(derive_seed(seed, l as u64));
        let init = AutoencoderLayer::random(inputs.cols(), hidden, config.slope, &mut rng)?;
        let (trained, history) = pretrain_layer(&init, &inputs, config, &mut rng)
            .map_err(|e| e.context(format!("pretraining autoencoder {}", l + 1)))?;
        inputs = trained.encode_all(&inputs);
        encoders.push(trained.encoder);
        pretrain.push(history);
    }

    let mut rng = SeededRng::new(derive_seed(seed, 100));
    let head = Dense::uniform(inputs.cols(), 2, &mut rng);
    let mut layers = encoders;
    layers.push(head);
    let mut net = FeedForward::new(layers, config.slope)?;
    let fine_tune = net.fit(x, y, &config.fine_tune, &mut rng)?;
    Ok((
        StackedAutoencoder::from_network(net),
        SaeHistory { pretrain, fine_tune },
    ))
}

/// Trains on the dataset rows at `train`.
pub fn stack_and_finetune(
    dataset: &Dataset,
    train: &[usize],
    config: &SaeTrainConfig,
    seed: u64,
) -> Result<StackedAutoencoder> {
    let (x, y) = dataset.subset(train);
    fit(&x, &y, config, seed).map(|(m, _)| m)
}
