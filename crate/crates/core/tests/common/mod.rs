#![allow(dead_code)]
pub mod checks;

use std::fmt::Write as _;
use std::path::PathBuf;

use hemobench::dataio::{self, Dataset, ANALYTES};
use hemobench::rng::SeededRng;
use hemobench::Matrix;

/// Standard normal draw (Box–Muller).
pub fn normal(rng: &mut SeededRng) -> f64 {
    let u1 = 1.0 - rng.uniform();
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Typical raw level and spread of each analyte for the negative class, and
/// the log-scale shift applied to positives.
const PROFILE: [(f64, f64, f64); 10] = [
    (25.0, 0.45, 0.35),  // ALT
    (28.0, 0.40, 0.45),  // AST
    (220.0, 0.30, 0.40), // LDH
    (35.0, 0.40, 0.10),  // Urea
    (8.5, 0.35, -0.45),  // WBC
    (4.6, 0.12, 0.00),   // RBC
    (250.0, 0.35, -0.25), // Platelet
    (0.7, 0.35, -0.15),  // Monocyte
    (1.9, 0.45, -0.60),  // Lymphocyte
    (5.6, 0.45, -0.20),  // Neutrophil
];

/// Synthetic blood panel CSV in the shape of the real data: the ten analyte
/// columns, an unused text column and a `label` column, with about 3% of
/// cells missing.
pub fn synthetic_csv(n: usize, seed: u64) -> String {
    let mut rng = SeededRng::new(seed);
    let mut out = String::from("patient,");
    out.push_str(&ANALYTES.join(","));
    out.push_str(",label\n");
    for i in 0..n {
        let label = u8::from(rng.uniform() < 0.55);
        let _ = write!(out, "P{i:04}");
        for &(level, spread, shift) in &PROFILE {
            out.push(',');
            if rng.uniform() < 0.03 {
                continue;
            }
            let z = normal(&mut rng) * spread + if label == 1 { shift } else { 0.0 };
            let _ = write!(out, "{:.3}", level * z.exp());
        }
        let _ = writeln!(out, ",{label}");
    }
    out
}

pub fn synthetic_dataset(n: usize, seed: u64) -> Dataset {
    let csv = synthetic_csv(n, seed);
    let table = dataio::read_csv(csv.as_bytes(), "label").unwrap();
    let table = dataio::select_columns(&table, &ANALYTES).unwrap();
    dataio::impute_and_normalize(&table).unwrap()
}

pub fn write_synthetic_csv(dir: &std::path::Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join("panel.csv");
    std::fs::write(&path, synthetic_csv(n, seed)).unwrap();
    path
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.uniform()).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_labels(n: usize, rng: &mut SeededRng) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.uniform() < 0.5)).collect()
}

/// `||a - b|| / max(||a|| + ||b||, 1e-12)` over whole gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / (na + nb).max(1e-12)
}

/// Central differences with step `h` on every coordinate of `params`.
pub fn numeric_gradient(params: &[f64], h: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = loss(&p);
            p[i] = orig - h;
            let minus = loss(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}
