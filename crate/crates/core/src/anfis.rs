//! Five-layer Takagi–Sugeno adaptive neuro-fuzzy inference system.
//!
//! Rules use a scatter partition: rule `r` owns one generalized Gaussian
//! membership function per input,
//!
//! ```text
//! mu_{r,i}(x) = exp(-((x - c_{r,i}) / a_{r,i})^(2 b_{r,i}))
//! ```
//!
//! The layers are
//!
//! 1. memberships `mu_{r,i}(x_i)`
//! 2. firing strengths `w_r = prod_i mu_{r,i}(x_i)`
//! 3. normalized strengths `w̄_r = w_r / sum_k w_k`
//! 4. weighted rule outputs `w̄_r f_r` with `f_r = sum_i coef_{r,i} x_i + e_r`
//! 5. output `sum_r w̄_r f_r`
//!
//! Layer 3 is evaluated from `ln w_r = -sum_i ((x_i - c)/a)^(2b)` with a
//! max-shift, which equals the direct ratio but does not underflow when every
//! product is tiny.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{dot, squared_distance, Matrix};
use crate::optim::{Adam, AdamConfig, Moments};
use crate::rng::SeededRng;

/// Rule counts evaluated by the rule-count sweep.
pub const RULE_SWEEP: [usize; 5] = [10, 12, 14, 16, 18];

pub const MIN_WIDTH: f64 = 1e-3;
pub const MIN_SHAPE: f64 = 0.5;
pub const MAX_SHAPE: f64 = 5.0;

/// Generalized Gaussian membership `exp(-((x - c)/a)^(2b))`.
pub fn membership(x: f64, a: f64, b: f64, c: f64) -> f64 {
    let u = (x - c) / a;
    (-(u * u).powf(b)).exp()
}

/// Layer-3 normalization `w_r / sum_k w_k`.
pub fn normalize_strengths(w: &[f64]) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Err(Error::Empty("firing strengths"));
    }
    if let Some(v) = w.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("firing strength {v}")));
    }
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroFiringStrength);
    }
    Ok(w.iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnfisModel {
    pub n_inputs: usize,
    pub n_rules: usize,
    /// Premise widths `a`, `n_rules × n_inputs`.
    pub widths: Vec<f64>,
    /// Premise shape exponents `b`, `n_rules × n_inputs`.
    pub shapes: Vec<f64>,
    /// Premise centers `c`, `n_rules × n_inputs`.
    pub centers: Vec<f64>,
    /// Consequent input weights, `n_rules × n_inputs`.
    pub coefficients: Vec<f64>,
    /// Consequent biases `e_r`.
    pub biases: Vec<f64>,
}

/// Intermediate outputs of the five layers for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutputs {
    pub memberships: Vec<f64>,
    pub strengths: Vec<f64>,
    pub normalized: Vec<f64>,
    pub rule_outputs: Vec<f64>,
    pub weighted: Vec<f64>,
    pub output: f64,
}

/// Gradient of the mean squared error with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AnfisGrad {
    pub widths: Vec<f64>,
    pub shapes: Vec<f64>,
    pub centers: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub biases: Vec<f64>,
}

impl AnfisGrad {
    fn zeros(rules: usize, inputs: usize) -> Self {
        let m = rules * inputs;
        Self {
            widths: vec![0.0; m],
            shapes: vec![0.0; m],
            centers: vec![0.0; m],
            coefficients: vec![0.0; m],
            biases: vec![0.0; rules],
        }
    }

    /// Widths, shapes, centers, coefficients, biases.
    pub fn flatten(&self) -> Vec<f64> {
        [
            &self.widths,
            &self.shapes,
            &self.centers,
            &self.coefficients,
            &self.biases,
        ]
        .into_iter()
        .flatten()
        .copied()
        .collect()
    }
}

impl AnfisModel {
    /// A model with unit widths, unit shapes, zero centers and zero consequents.
    pub fn new(n_inputs: usize, n_rules: usize) -> Result<Self> {
        if n_inputs == 0 || n_rules == 0 {
            return Err(Error::InvalidParameter(
                "ANFIS needs at least one input and one rule".into(),
            ));
        }
        let m = n_inputs * n_rules;
        Ok(Self {
            n_inputs,
            n_rules,
            widths: vec![1.0; m],
            shapes: vec![1.0; m],
            centers: vec![0.0; m],
            coefficients: vec![0.0; m],
            biases: vec![0.0; n_rules],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_inputs * self.n_rules;
        if self.n_rules == 0 || self.n_inputs == 0 {
            return Err(Error::InvalidParameter("empty ANFIS model".into()));
        }
        for (name, len) in [
            ("widths", self.widths.len()),
            ("shapes", self.shapes.len()),
            ("centers", self.centers.len()),
            ("coefficients", self.coefficients.len()),
        ] {
            if len != m {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {len} entries, expected {m}"
                )));
            }
        }
        if self.biases.len() != self.n_rules {
            return Err(Error::InvalidParameter(format!(
                "biases has {} entries, expected {}",
                self.biases.len(),
                self.n_rules
            )));
        }
        if self.widths.iter().any(|&a| !(a > 0.0)) || self.shapes.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::InvalidParameter(
                "premise widths and shapes must be positive".into(),
            ));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn rule_slice<'a>(&self, v: &'a [f64], r: usize) -> &'a [f64] {
        &v[r * self.n_inputs..(r + 1) * self.n_inputs]
    }

    /// Layer 2: product of each rule's memberships.
    pub fn firing_strengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok((0..self.n_rules)
            .map(|r| {
                let base = r * self.n_inputs;
                x.iter()
                    .enumerate()
                    .map(|(i, &xi)| {
                        let k = base + i;
                        membership(xi, self.widths[k], self.shapes[k], self.centers[k])
                    })
                    .product()
            })
            .collect())
    }

    fn log_strengths(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rules)
            .map(|r| {
                let base = r * self.n_inputs;
                -x.iter()
                    .enumerate()
                    .map(|(i, &xi)| {
                        let k = base + i;
                        let u = (xi - self.centers[k]) / self.widths[k];
                        (u * u).powf(self.shapes[k])
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    /// Layer 3 outputs.
    pub fn normalized_strengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(softmax_in_place(self.log_strengths(x)))
    }

    fn rule_output(&self, r: usize, x: &[f64]) -> f64 {
        dot(self.rule_slice(&self.coefficients, r), x) + self.biases[r]
    }

    /// Every layer's output for one input.
    pub fn layers(&self, x: &[f64]) -> Result<LayerOutputs> {
        self.check_input(x)?;
        let memberships = (0..self.n_rules * self.n_inputs)
            .map(|k| {
                membership(
                    x[k % self.n_inputs],
                    self.widths[k],
                    self.shapes[k],
                    self.centers[k],
                )
            })
            .collect();
        let strengths = self.firing_strengths(x)?;
        let normalized = self.normalized_strengths(x)?;
        let rule_outputs: Vec<f64> = (0..self.n_rules).map(|r| self.rule_output(r, x)).collect();
        let weighted: Vec<f64> = normalized
            .iter()
            .zip(&rule_outputs)
            .map(|(w, f)| w * f)
            .collect();
        let output = weighted.iter().sum();
        Ok(LayerOutputs {
            memberships,
            strengths,
            normalized,
            rule_outputs,
            weighted,
            output,
        })
    }

    /// Layer 5 output.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let wbar = softmax_in_place(self.log_strengths(x));
        Ok(wbar
            .iter()
            .enumerate()
            .map(|(r, w)| w * self.rule_output(r, x))
            .sum())
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(decide(self.forward(x)?))
    }

    /// Mean squared error over the rows at `indices`.
    pub fn loss(&self, x: &Matrix, y: &[u8], indices: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for &i in indices {
            let e = self.forward(x.row(i))? - f64::from(y[i]);
            total += e * e;
        }
        Ok(total / indices.len() as f64)
    }

    /// Mean squared error and its analytic gradient over the rows at `indices`.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[u8], indices: &[usize]) -> (f64, AnfisGrad) {
        let (n, rules) = (self.n_inputs, self.n_rules);
        let mut grad = AnfisGrad::zeros(rules, n);
        let m = rules * n;
        let mut powered = vec![0.0; m];
        let mut log_s = vec![0.0; m];
        let mut scaled = vec![0.0; m];
        let mut logw = vec![0.0; rules];
        let mut f = vec![0.0; rules];
        let inv_n = 1.0 / indices.len() as f64;
        let mut total = 0.0;

        for &row in indices {
            let xr = x.row(row);
            for r in 0..rules {
                let mut acc = 0.0;
                for i in 0..n {
                    let k = r * n + i;
                    let u = (xr[i] - self.centers[k]) / self.widths[k];
                    let s = u * u;
                    scaled[k] = u;
                    if s > 0.0 {
                        let ls = s.ln();
                        let p = (self.shapes[k] * ls).exp();
                        log_s[k] = ls;
                        powered[k] = p;
                        acc += p;
                    } else {
                        log_s[k] = 0.0;
                        powered[k] = 0.0;
                    }
                }
                logw[r] = -acc;
                f[r] = self.rule_output(r, xr);
            }
            let wbar = softmax_slice(&mut logw);
            let out: f64 = wbar.iter().zip(&f).map(|(w, fr)| w * fr).sum();
            let err = out - f64::from(y[row]);
            total += err * err;
            let g = 2.0 * err * inv_n;

            for r in 0..rules {
                let wr = wbar[r];
                let gw = g * wr;
                grad.biases[r] += gw;
                // d out / d ln w_r
                let dlw = gw * (f[r] - out);
                for i in 0..n {
                    let k = r * n + i;
                    grad.coefficients[k] += gw * xr[i];
                    let p = powered[k];
                    if p == 0.0 {
                        continue;
                    }
                    let (a, b, u) = (self.widths[k], self.shapes[k], scaled[k]);
                    // ln w_r = -sum_i p_i with p = (u^2)^b, u = (x - c)/a
                    let dp = -dlw;
                    grad.shapes[k] += dp * p * log_s[k];
                    let dp_du = 2.0 * b * p / u;
                    grad.centers[k] -= dp * dp_du / a;
                    grad.widths[k] -= dp * dp_du * u / a;
                }
            }
        }
        (total * inv_n, grad)
    }

    /// Widths, shapes, centers, coefficients, biases.
    pub fn flat_params(&self) -> Vec<f64> {
        [
            &self.widths,
            &self.shapes,
            &self.centers,
            &self.coefficients,
            &self.biases,
        ]
        .into_iter()
        .flatten()
        .copied()
        .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for v in [
            &mut self.widths,
            &mut self.shapes,
            &mut self.centers,
            &mut self.coefficients,
            &mut self.biases,
        ] {
            for p in v.iter_mut() {
                *p = it.next().expect("parameter vector too short");
            }
        }
    }

    fn clamp_premises(&mut self) {
        self.widths.iter_mut().for_each(|a| *a = a.max(MIN_WIDTH));
        self.shapes
            .iter_mut()
            .for_each(|b| *b = b.clamp(MIN_SHAPE, MAX_SHAPE));
    }
}

/// Decision rule: label 1 when the output reaches 0.5.
pub fn decide(output: f64) -> u8 {
    u8::from(output >= 0.5)
}

fn softmax_slice(logits: &mut [f64]) -> &[f64] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
    logits
}

fn softmax_in_place(mut logits: Vec<f64>) -> Vec<f64> {
    softmax_slice(&mut logits);
    logits
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnfisTrainConfig {
    pub n_rules: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
}

impl Default for AnfisTrainConfig {
    fn default() -> Self {
        Self {
            n_rules: 14,
            epochs: 4000,
            adam: AdamConfig::default(),
        }
    }
}

impl AnfisTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.n_rules == 0 {
            return Err(Error::InvalidParameter(
                "epochs and rule count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// k-means++ seeding: the first center uniformly, each next one with
/// probability proportional to the squared distance to the nearest chosen center.
fn seed_centers(x: &Matrix, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let n = x.rows();
    let mut chosen = vec![rng.below(n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            nearest
                .iter()
                .position(|d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.below(n)
        };
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), x.row(next)));
        }
    }
    chosen
}

/// Initial premise parameters from the training rows: centers by k-means++
/// seeding, widths from the per-feature standard deviation, unit shapes and
/// zero consequents.
pub fn initialize(x: &Matrix, n_rules: usize, rng: &mut SeededRng) -> Result<AnfisModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let n = x.cols();
    let mut model = AnfisModel::new(n, n_rules)?;
    let rows = x.rows() as f64;
    let stds: Vec<f64> = (0..n)
        .map(|j| {
            if x.rows() < 2 {
                return 1.0;
            }
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / rows;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (rows - 1.0);
            var.sqrt().max(MIN_WIDTH)
        })
        .collect();
    for (r, &idx) in seed_centers(x, n_rules, rng).iter().enumerate() {
        model.centers[r * n..(r + 1) * n].copy_from_slice(x.row(idx));
        model.widths[r * n..(r + 1) * n].copy_from_slice(&stds);
    }
    Ok(model)
}

/// Full-batch Adam on mean squared error against the 0/1 labels. Premise
/// widths and shapes are clamped after every step.
pub fn fit(x: &Matrix, y: &[u8], config: &AnfisTrainConfig, seed: u64) -> Result<AnfisModel> {
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
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidParameter(format!("label {bad} is not 0 or 1")));
    }
    let mut rng = SeededRng::new(seed);
    let mut model = initialize(x, config.n_rules, &mut rng)?;
    let all: Vec<usize> = (0..x.rows()).collect();
    let mut adam = Adam::new(config.adam);
    let m = model.widths.len();
    let mut mom: [Moments; 5] = [
        Moments::new(m),
        Moments::new(m),
        Moments::new(m),
        Moments::new(m),
        Moments::new(model.n_rules),
    ];
    for _ in 0..config.epochs {
        let (_, g) = model.loss_and_grad(x, y, &all);
        adam.begin_step();
        let [ma, mb, mc, mq, me] = &mut mom;
        adam.apply(ma, &mut model.widths, &g.widths);
        adam.apply(mb, &mut model.shapes, &g.shapes);
        adam.apply(mc, &mut model.centers, &g.centers);
        adam.apply(mq, &mut model.coefficients, &g.coefficients);
        adam.apply(me, &mut model.biases, &g.biases);
        model.clamp_premises();
    }
    Ok(model)
}

/// Trains on the dataset rows at `train`.
pub fn train(
    dataset: &Dataset,
    train: &[usize],
    config: &AnfisTrainConfig,
    seed: u64,
) -> Result<AnfisModel> {
    let (x, y) = dataset.subset(train);
    fit(&x, &y, config, seed)
}
