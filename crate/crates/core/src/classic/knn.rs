use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub features: Matrix,
    pub labels: Vec<u8>,
}

pub fn knn_fit(x: &Matrix, y: &[u8], config: &KnnConfig) -> Result<KnnModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if config.k == 0 || config.k > x.rows() {
        return Err(Error::OutOfRange {
            name: "k",
            value: config.k.to_string(),
            range: format!("1..={}", x.rows()),
        });
    }
    Ok(KnnModel {
        k: config.k,
        features: x.clone(),
        labels: y.to_vec(),
    })
}

impl KnnModel {
    /// Training indices of the `k` nearest points; distance ties go to the lower index.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.features.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.features.cols(),
                got: x.len(),
            });
        }
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter_rows()
            .enumerate()
            .map(|(i, row)| (squared_distance(row, x), i))
            .collect();
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority label among the neighbours; an even split goes to label 1.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        let nb = self.neighbours(x)?;
        let ones = nb.iter().filter(|&&i| self.labels[i] == 1).count();
        Ok(u8::from(2 * ones >= nb.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted() -> (Matrix, Vec<u8>) {
        let x = Matrix::from_rows(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.2],
            [1.0, 1.0],
            [0.9, 1.0],
            [0.5, 0.45],
        ])
        .unwrap();
        (x, vec![0, 0, 1, 1, 1, 0])
    }

    #[test]
    fn one_nearest_neighbour() {
        let (x, y) = planted();
        let m = knn_fit(&x, &y, &KnnConfig { k: 1 }).unwrap();
        assert_eq!(m.predict(&[0.05, 0.19]).unwrap(), 1);
        assert_eq!(m.predict(&[0.9, 1.0]).unwrap(), 1);
        assert_eq!(m.predict(&[0.5, 0.45]).unwrap(), 0);
    }

    #[test]
    fn three_nearest_matches_exhaustive_sort() {
        let (x, y) = planted();
        let m = knn_fit(&x, &y, &KnnConfig { k: 3 }).unwrap();
        let queries = [[0.3, 0.3], [0.6, 0.6], [0.0, 0.1], [1.0, 0.0], [0.45, 0.5]];
        for q in queries {
            let mut all: Vec<(f64, usize)> = (0..6)
                .map(|i| {
                    let r = x.row(i);
                    (((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2)), i)
                })
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let votes: usize = all[..3].iter().map(|&(_, i)| usize::from(y[i])).sum();
            let oracle = u8::from(votes >= 2);
            assert_eq!(m.predict(&q).unwrap(), oracle, "query {q:?}");
        }
    }

    #[test]
    fn distance_tie_prefers_lower_index() {
        let x = Matrix::from_rows(&[[1.0], [-1.0]]).unwrap();
        let m = knn_fit(&x, &[0, 1], &KnnConfig { k: 1 }).unwrap();
        assert_eq!(m.neighbours(&[0.0]).unwrap(), vec![0]);
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn even_split_goes_to_one() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = knn_fit(&x, &[0, 1], &KnnConfig { k: 2 }).unwrap();
        assert_eq!(m.predict(&[0.2]).unwrap(), 1);
    }

    #[test]
    fn k_equal_n_predicts_global_majority() {
        let (x, y) = planted();
        let m = knn_fit(&x, &y, &KnnConfig { k: 5 }).unwrap();
        let sub = knn_fit(&x.select_rows(&[0, 1, 2, 3, 5]), &[0, 0, 1, 1, 0], &KnnConfig { k: 5 }).unwrap();
        for q in [[0.0, 0.0], [5.0, 5.0]] {
            assert_eq!(sub.predict(&q).unwrap(), 0);
        }
        assert!(m.predict(&[0.0, 0.0]).is_ok());
    }

    #[test]
    fn errors() {
        let (x, y) = planted();
        assert!(knn_fit(&x, &y, &KnnConfig { k: 0 }).is_err());
        assert!(knn_fit(&x, &y, &KnnConfig { k: 7 }).is_err());
        let m = knn_fit(&x, &y, &KnnConfig { k: 1 }).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }
}
