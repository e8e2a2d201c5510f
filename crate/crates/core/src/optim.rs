//! First-order optimizers operating on flat parameter slices.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Adam with bias correction. Call [`Adam::begin_step`] once per update,
/// then [`Adam::apply`] for every tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: i32,
    bias1: f64,
    bias2: f64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            bias1: 1.0,
            bias2: 1.0,
        }
    }

    pub fn begin_step(&mut self) {
        self.step = self.step.saturating_add(1);
        self.bias1 = 1.0 - self.config.beta1.powi(self.step);
        self.bias2 = 1.0 - self.config.beta2.powi(self.step);
    }

    pub fn apply(&self, moments: &mut Moments, params: &mut [f64], grads: &[f64]) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut moments.m)
            .zip(&mut moments.v)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / self.bias1;
            let v_hat = *v / self.bias2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// Classical momentum SGD: `v <- mu v - lr g; p <- p + v`.
#[derive(Debug, Clone, Copy)]
pub struct Momentum {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Momentum {
    pub fn apply(&self, velocity: &mut [f64], params: &mut [f64], grads: &[f64]) {
        for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity) {
            *v = self.momentum * *v - self.learning_rate * g;
            *p += *v;
        }
    }
}
