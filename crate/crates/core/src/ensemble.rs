//! Hard majority vote over an MLP, a k-nearest-neighbour model and a random forest.

use serde::{Deserialize, Serialize};

use crate::classic::{forest_fit, knn_fit, mlp_fit, ForestConfig, ForestModel, KnnConfig, KnnModel, MlpConfig, MlpModel};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Classifier;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EnsembleConfig {
    pub mlp: MlpConfig,
    pub knn: KnnConfig,
    pub forest: ForestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub mlp: MlpModel,
    pub knn: KnnModel,
    pub forest: ForestModel,
}

/// Majority label; an exact tie (only possible with an even number of
/// voters) goes to label 1.
pub fn majority_vote(votes: &[u8]) -> u8 {
    let ones = votes.iter().filter(|&&v| v == 1).count();
    u8::from(2 * ones >= votes.len())
}

impl EnsembleModel {
    /// Labels from MLP, KNN and forest, in that order.
    pub fn member_votes(&self, x: &[f64]) -> Result<[u8; 3]> {
        Ok([self.mlp.predict(x)?, self.knn.predict(x)?, self.forest.predict(x)?])
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(majority_vote(&self.member_votes(x)?))
    }
}

impl Classifier for EnsembleModel {
    fn predict(&self, x: &[f64]) -> Result<u8> {
        EnsembleModel::predict(self, x)
    }
}

/// Trains the three members on the same rows. Member seeds are derived from
/// `seed` (MLP stream 1, forest stream 3; KNN is deterministic).
pub fn ensemble_fit(x: &Matrix, y: &[u8], config: &EnsembleConfig, seed: u64) -> Result<EnsembleModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::SingleClass);
    }
    let ((mlp, knn), forest) = rayon::join(
        || {
            (
                mlp_fit(x, y, &config.mlp, derive_seed(seed, 1)).map_err(|e| e.context("ensemble member MLP")),
                knn_fit(x, y, &config.knn).map_err(|e| e.context("ensemble member KNN")),
            )
        },
        || forest_fit(x, y, &config.forest, derive_seed(seed, 3)).map_err(|e| e.context("ensemble member forest")),
    );
    Ok(EnsembleModel {
        mlp: mlp?,
        knn: knn?,
        forest: forest?,
    })
}

pub fn ensemble_train(
    dataset: &Dataset,
    train: &[usize],
    config: &EnsembleConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    let (x, y) = dataset.subset(train);
    ensemble_fit(&x, &y, config, seed)
}
