//! Soft-margin support vector machine trained by sequential minimal
//! optimization with second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, squared_distance, Matrix};

/// Curvature floor for non-positive-definite pairs (sigmoid kernel).
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Sigmoid { gamma: f64, coef0: f64 },
}

impl Kernel {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(u, v),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(u, v)).exp(),
            Kernel::Sigmoid { gamma, coef0 } => (gamma * dot(u, v) + coef0).tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub kernel: KernelKind,
    pub c: f64,
    /// `None` means `1 / n_features`.
    pub gamma: Option<f64>,
    pub coef0: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    /// Cap on working-pair updates.
    pub max_iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: None,
            coef0: 0.0,
            tolerance: 1e-3,
            max_iterations: 10_000,
        }
    }
}

impl SvmConfig {
    pub fn with_kernel(kernel: KernelKind) -> Self {
        Self {
            kernel,
            ..Self::default()
        }
    }

    fn kernel_for(&self, n_features: usize) -> Kernel {
        let gamma = self.gamma.unwrap_or(1.0 / n_features.max(1) as f64);
        match self.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf { gamma },
            KernelKind::Sigmoid => Kernel::Sigmoid {
                gamma,
                coef0: self.coef0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Matrix,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    /// Dual variables `alpha_i` of the support vectors, `0 < alpha_i <= C`.
    pub alphas: Vec<f64>,
    /// Support-vector labels mapped to -1/+1.
    pub signs: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    /// `sum_i alpha_i y_i k(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.support_vectors.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.support_vectors.cols(),
                got: x.len(),
            });
        }
        Ok(self
            .support_vectors
            .iter_rows()
            .zip(self.alphas.iter().zip(&self.signs))
            .map(|(sv, (a, y))| a * y * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    /// Label 1 when the decision value is non-negative.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision(x)? >= 0.0))
    }

    /// Dual variables for all `n` training rows (zero off the support set).
    pub fn full_alphas(&self, n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n];
        for (&i, &v) in self.support_indices.iter().zip(&self.alphas) {
            a[i] = v;
        }
        a
    }
}

/// `sum alpha - ½ sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j)`.
pub fn dual_objective(kernel: &Kernel, x: &Matrix, signs: &[f64], alphas: &[f64]) -> f64 {
    let n = x.rows();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * signs[i] * signs[j] * kernel.eval(x.row(i), x.row(j));
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

pub fn to_sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn svm_fit(x: &Matrix, y: &[u8], config: &SvmConfig) -> Result<SvmModel> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !(config.c > 0.0) {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::SingleClass);
    }
    let kernel = config.kernel_for(x.cols());
    let c = config.c;
    let s: Vec<f64> = y.iter().map(|&l| to_sign(l)).collect();

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let kij = |i: usize, j: usize| k[i * n + j];

    let mut alpha = vec![0.0; n];
    // gradient of ½ aᵀQa - eᵀa
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut i_sel = None;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], s[t]) {
                let v = -s[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut j_sel = None;
        let mut g_min = f64::INFINITY;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], s[t]) {
                    continue;
                }
                let v = -s[t] * grad[t];
                g_min = g_min.min(v);
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = kij(i, i) + kij(t, t) - 2.0 * kij(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let gain = -(b * b) / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if g_max - g_min < config.tolerance || j_sel.is_none() {
            converged = true;
            break;
        }
        if iterations == config.max_iterations {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel.unwrap_or(0), j_sel.unwrap_or(0));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if s[i] != s[j] {
            let mut quad = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += s[t] * (s[i] * kij(t, i) * di + s[j] * kij(t, j) * dj);
        }
    }

    // bias: mean over free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = s[t] * grad[t];
        if alpha[t] >= c {
            if s[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else {
        (ub + lb) / 2.0
    };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    if support_indices.is_empty() {
        return Err(Error::InvalidParameter("SMO produced no support vectors".into()));
    }
    if !converged {
        tracing::warn!(iterations, "SMO stopped at the iteration cap before meeting the KKT tolerance");
    }
    Ok(SvmModel {
        kernel,
        c,
        support_vectors: x.select_rows(&support_indices),
        alphas: support_indices.iter().map(|&t| alpha[t]).collect(),
        signs: support_indices.iter().map(|&t| s[t]).collect(),
        support_indices,
        bias: -rho,
        converged,
        iterations,
    })
}
