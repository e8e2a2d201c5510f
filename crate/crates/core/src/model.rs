use crate::anfis::AnfisModel;
use crate::classic::{ForestModel, KnnModel, MlpModel, SvmModel};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::sae::StackedAutoencoder;

/// A trained binary classifier mapping a feature vector to label 0 or 1.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> Result<u8>;

    fn predict_rows(&self, x: &Matrix) -> Result<Vec<u8>> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

macro_rules! impl_classifier {
    ($($ty:ty),*) => {
        $(impl Classifier for $ty {
            fn predict(&self, x: &[f64]) -> Result<u8> {
                <$ty>::predict(self, x)
            }
        })*
    };
}

impl_classifier!(
    AnfisModel,
    StackedAutoencoder,
    KnnModel,
    ForestModel,
    MlpModel,
    SvmModel
);
