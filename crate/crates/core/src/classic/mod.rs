//! Baseline classifiers: k-nearest neighbours, random forest, multi-layer
//! perceptron and kernel SVM.

pub mod forest;
pub mod knn;
pub mod mlp;
pub mod svm;

pub use forest::{forest_fit, ForestConfig, ForestModel};
pub use knn::{knn_fit, KnnConfig, KnnModel};
pub use mlp::{mlp_fit, MlpConfig, MlpModel};
pub use svm::{svm_fit, Kernel, KernelKind, SvmConfig, SvmModel};
