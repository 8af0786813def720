//! Kernel-target alignment, its gradient, and the ridge classifier built on
//! top of a trained kernel.

mod alignment;
mod dataset;
mod ridge;

pub use alignment::{
    alignment, alignment_with_gradient, gram, ideal_gram, loss, loss_and_grad, loss_grad,
    noisy_alignment_grad_analytic, GramMatrix, LossGrad, DEGENERATE_EPS,
};
pub use dataset::{LabeledDataset, LabeledPoint};
pub use ridge::{
    accuracy_from_cross, cross_gram, fit_and_score, fit_ridge, predict, score, RidgeModel, DEFAULT_LAMBDA,
    RESIDUAL_TOL,
};

use serde::{Deserialize, Serialize};

/// Accuracies for one node: local/local, local/global and global/global
/// train/test pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score1: f64,
    pub score2: f64,
    pub score3: f64,
    pub alignment: f64,
    pub iterations: usize,
}
