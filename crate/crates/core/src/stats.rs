//! Preprocessing analytics: covariance, its eigenvalue spectrum, Pearson
//! correlation against the label and top-k feature ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds a symmetric matrix from the upper triangle produced by `f(i, j)`, `i <= j`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    /// Validates symmetry of a dense row-major matrix within 1e-12.
    pub fn from_dense(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let (a, b) = (entries[i * dim + j], entries[j * dim + i]);
                if (a - b).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Comma-separated dump with a header row of `names` (or indices).
    pub fn to_csv(&self, names: Option<&[String]>) -> String {
        let labels: Vec<String> = match names {
            Some(n) if n.len() == self.dim => n.to_vec(),
            _ => (0..self.dim).map(|i| i.to_string()).collect(),
        };
        let mut out = String::from(",");
        out.push_str(&labels.join(","));
        out.push('\n');
        for i in 0..self.dim {
            out.push_str(&labels[i]);
            for j in 0..self.dim {
                out.push(',');
                out.push_str(&self.get(i, j).to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    /// Eigenvalues, largest first.
    pub values: Vec<f64>,
    pub sweeps: usize,
}

impl EigenSpectrum {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn column_means(features: &Matrix) -> Vec<f64> {
    let n = features.rows() as f64;
    let mut means = vec![0.0; features.cols()];
    for row in features.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// Sample covariance (denominator `n - 1`).
pub fn covariance(features: &Matrix) -> Result<SymmetricMatrix> {
    let n = features.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let means = column_means(features);
    let p = features.cols();
    let mut centered = features.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let denom = (n - 1) as f64;
    Ok(SymmetricMatrix::from_upper(p, |a, b| {
        centered
            .iter_rows()
            .map(|r| r[a] * r[b])
            .sum::<f64>()
            / denom
    }))
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps stop once the largest off-diagonal magnitude falls below
/// `1e-12 * max(1, ||A||_F)`.
pub fn eigen_spectrum(m: &SymmetricMatrix) -> Result<EigenSpectrum> {
    let n = m.dim;
    let mut a = m.entries.clone();
    let tol = JACOBI_TOLERANCE * m.frobenius_norm().max(1.0);
    let off_max = |a: &[f64]| {
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(a[i * n + j].abs());
            }
        }
        best
    };

    let mut sweeps = 0;
    while off_max(&a) >= tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }

    let mut values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(EigenSpectrum { values, sweeps })
}

/// Pearson correlation over the feature columns plus the label as the last
/// column. The diagonal is exactly 1.
pub fn pearson_matrix(features: &Matrix, labels: &[u8]) -> Result<SymmetricMatrix> {
    if features.rows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.rows(),
            right: labels.len(),
        });
    }
    let n = features.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let p = features.cols();
    let mut columns: Vec<Vec<f64>> = (0..p).map(|j| features.column(j)).collect();
    columns.push(labels.iter().map(|&l| f64::from(l)).collect());

    for (j, col) in columns.iter_mut().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            let name = if j == p { "label".to_owned() } else { format!("feature {j}") };
            return Err(Error::ConstantColumn(name));
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    Ok(SymmetricMatrix::from_upper(p + 1, |a, b| {
        if a == b {
            return 1.0;
        }
        let num: f64 = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum();
        (num / (norms[a] * norms[b])).clamp(-1.0, 1.0)
    }))
}

/// Indices of the `k` features most correlated (in absolute value) with the
/// label, which occupies the last row of `corr`. Ties keep the lower index first.
pub fn select_top_features(corr: &SymmetricMatrix, k: usize) -> Result<Vec<usize>> {
    let n_features = corr.dim().saturating_sub(1);
    if k == 0 || k > n_features {
        return Err(Error::OutOfRange {
            name: "k",
            value: k.to_string(),
            range: format!("1..={n_features}"),
        });
    }
    let label = n_features;
    let mut order: Vec<usize> = (0..n_features).collect();
    order.sort_by(|&a, &b| {
        corr.get(b, label)
            .abs()
            .total_cmp(&corr.get(a, label).abs())
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}
