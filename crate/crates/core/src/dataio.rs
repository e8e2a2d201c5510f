//! Blood-test table ingestion, cleaning, min–max normalization and
//! deterministic k-fold partitioning.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// The ten analytes used by the blood-test classifiers, in canonical order.
pub const ANALYTES: [&str; 10] = [
    "ALT",
    "AST",
    "LDH",
    "Urea",
    "WBC",
    "RBC",
    "Platelet",
    "Monocyte",
    "Lymphocyte",
    "Neutrophil",
];

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// A parsed CSV: numeric feature columns (missing cells are `None`) plus a
/// binary label column held separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<u8>,
    pub label_column: String,
    /// Columns containing text that does not parse as a number. Their cells
    /// are stored as `None` and they cannot be selected as features.
    pub text_columns: Vec<String>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Per-feature statistics recorded during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f64,
    pub max: f64,
    /// Median of the present raw values, used to fill missing cells.
    pub median: f64,
}

impl FeatureStats {
    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, scaled: f64) -> f64 {
        self.min + scaled * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub norm_stats: Vec<FeatureStats>,
}

impl Dataset {
    /// Builds a dataset from features that are already in `[0, 1]`, recording
    /// identity statistics. Useful for synthetic data.
    pub fn from_normalized(features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.rows(),
                right: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel {
                row: labels.iter().position(|&l| l == bad).unwrap_or(0) + 1,
                value: bad.to_string(),
            });
        }
        let feature_names = (0..features.cols()).map(|j| format!("x{}", j + 1)).collect();
        let norm_stats = vec![
            FeatureStats {
                min: 0.0,
                max: 1.0,
                median: 0.5,
            };
            features.cols()
        ];
        Ok(Self {
            features,
            labels,
            feature_names,
            norm_stats,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Rows and labels at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> (Matrix, Vec<u8>) {
        let x = self.features.select_rows(indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }

    /// Maps the normalized features back to raw units.
    pub fn denormalize(&self) -> Matrix {
        let mut out = self.features.clone();
        for i in 0..out.rows() {
            for (v, s) in out.row_mut(i).iter_mut().zip(&self.norm_stats) {
                *v = s.denormalize(*v);
            }
        }
        out
    }

    /// Applies the recorded statistics to raw-unit rows.
    pub fn normalize_raw(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: raw.cols(),
            });
        }
        let mut out = raw.clone();
        for i in 0..out.rows() {
            for (v, s) in out.row_mut(i).iter_mut().zip(&self.norm_stats) {
                *v = s.normalize(*v);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads a comma-separated file with a header row. Empty cells are missing
/// values; the label column must hold 0 or 1 on every row.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_owned()))?;

    let column_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut is_text = vec![false; column_names.len()];
    let mut rows = Vec::new();
    let mut labels = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        if record.len() != header.len() {
            return Err(Error::Arity {
                row: row_no,
                expected: header.len(),
                found: record.len(),
            });
        }
        labels.push(parse_label(&record[label_idx], row_no)?);
        let mut row = Vec::with_capacity(column_names.len());
        for (j, cell) in record.iter().enumerate().filter(|&(j, _)| j != label_idx) {
            let col = if j < label_idx { j } else { j - 1 };
            if cell.is_empty() {
                row.push(None);
            } else if let Ok(v) = cell.parse::<f64>() {
                row.push(v.is_finite().then_some(v));
            } else {
                is_text[col] = true;
                row.push(None);
            }
        }
        rows.push(row);
    }

    let text_columns = column_names
        .iter()
        .zip(&is_text)
        .filter(|&(_, &t)| t)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(RawTable {
        column_names,
        rows,
        labels,
        label_column: label_column.to_owned(),
        text_columns,
    })
}

fn parse_label(cell: &str, row: usize) -> Result<u8> {
    let invalid = || Error::InvalidLabel {
        row,
        value: cell.to_owned(),
    };
    match cell.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(invalid()),
    }
}

/// Projects the table onto `names`, in the order given.
pub fn select_columns<S: AsRef<str>>(table: &RawTable, names: &[S]) -> Result<RawTable> {
    if names.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut seen = HashSet::new();
    let mut indices = Vec::with_capacity(names.len());
    for name in names {
        let name = name.as_ref();
        if !seen.insert(name) {
            return Err(Error::DuplicateColumn(name.to_owned()));
        }
        let idx = table
            .column_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))?;
        if table.text_columns.iter().any(|t| t == name) {
            return Err(Error::NonNumericColumn(name.to_owned()));
        }
        indices.push(idx);
    }
    Ok(RawTable {
        column_names: names.iter().map(|n| n.as_ref().to_owned()).collect(),
        rows: table
            .rows
            .iter()
            .map(|r| indices.iter().map(|&j| r[j]).collect())
            .collect(),
        labels: table.labels.clone(),
        label_column: table.label_column.clone(),
        text_columns: Vec::new(),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fills missing cells with the per-feature median of present values, then
/// min–max scales every feature to `[0, 1]`.
pub fn impute_and_normalize(table: &RawTable) -> Result<Dataset> {
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if let Some(name) = table.text_columns.first() {
        return Err(Error::NonNumericColumn(name.clone()));
    }
    let p = table.column_names.len();
    if p == 0 {
        return Err(Error::EmptySelection);
    }

    let mut norm_stats = Vec::with_capacity(p);
    for (j, name) in table.column_names.iter().enumerate() {
        let mut present: Vec<f64> = table.rows.iter().filter_map(|r| r[j]).collect();
        if present.is_empty() {
            return Err(Error::AllMissing(name.clone()));
        }
        let min = present.iter().copied().fold(f64::INFINITY, f64::min);
        let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(Error::ConstantColumn(name.clone()));
        }
        norm_stats.push(FeatureStats {
            min,
            max,
            median: median(&mut present),
        });
    }

    let mut features = Matrix::zeros(n, p);
    for (i, row) in table.rows.iter().enumerate() {
        for (j, (cell, stats)) in row.iter().zip(&norm_stats).enumerate() {
            features.set(i, j, stats.normalize(cell.unwrap_or(stats.median)));
        }
    }

    Ok(Dataset {
        features,
        labels: table.labels.clone(),
        feature_names: table.column_names.clone(),
        norm_stats,
    })
}

/// A partition of `0..n_samples` into `k` disjoint folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// All indices outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, ix)| ix.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Shuffles `0..n_samples` with the seeded generator and deals the result
/// round-robin into `k` folds. Each fold is stored in ascending order.
pub fn make_folds(n_samples: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n_samples {
        return Err(Error::InvalidFoldCount { n: n_samples, k });
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut folds = vec![Vec::with_capacity(n_samples / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}
