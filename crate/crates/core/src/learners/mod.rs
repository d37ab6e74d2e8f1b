//! From-scratch linear learners and neighbor search shared by the utility
//! probes and the attacks.

mod auc;
mod knn;
pub mod linalg;
mod logistic;
mod preprocess;
mod ridge;

pub use auc::roc_auc;
pub use knn::{knn_from_distances, knn_indices, pairwise_sq_distances};
pub use logistic::{
    fit_logistic, fit_logistic_with_report, logistic_gradient, logistic_objective, predict, predict_proba,
    FitConfig, FitReport, LinearClassifier,
};
pub use preprocess::{stratified_split, Standardizer};
pub use ridge::{fit_ridge, LinearMap};
