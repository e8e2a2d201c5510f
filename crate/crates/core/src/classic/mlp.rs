use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{FeedForward, FitConfig};
use crate::optim::AdamConfig;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub fit: FitConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 8],
            fit: FitConfig {
                epochs: 200,
                batch_size: 32,
                adam: AdamConfig::default(),
            },
        }
    }
}

/// ReLU hidden layers and a two-unit softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: FeedForward,
}

impl MlpModel {
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.network.probabilities(x)
    }

    /// Argmax; exact ties go to label 1.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        self.network.predict(x)
    }
}

pub fn mlp_fit(x: &Matrix, y: &[u8], config: &MlpConfig, seed: u64) -> Result<MlpModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut dims = Vec::with_capacity(config.hidden.len() + 2);
    dims.push(x.cols());
    dims.extend_from_slice(&config.hidden);
    dims.push(2);
    let mut rng = SeededRng::new(seed);
    let mut network = FeedForward::random(&dims, 0.0, &mut rng)?;
    network.fit(x, y, &config.fit, &mut rng)?;
    Ok(MlpModel { network })
}
