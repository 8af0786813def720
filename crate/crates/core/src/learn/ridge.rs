use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::alignment::{sample_gram, GramMatrix};
use super::dataset::{check_label, LabeledDataset};
use crate::qkernel::{FeatureMapSpec, KernelEngine, NoiseModel, ParameterVector};
use crate::{Error, Result};

/// Largest accepted `max |(K + lambda I) alpha - y|`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Default ridge regularizer.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Dual kernel ridge classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// Training points, needed to score unseen data.
    pub train: Option<LabeledDataset>,
}

impl RidgeModel {
    pub fn with_training(mut self, data: LabeledDataset) -> Result<Self> {
        if data.len() != self.alpha.len() {
            return Err(Error::Dimension(format!(
                "{} training points for {} coefficients",
                data.len(),
                self.alpha.len()
            )));
        }
        self.train = Some(data);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Solves `(K + lambda I) alpha = y`, by Cholesky when the system is positive
/// definite and by LU otherwise.
pub fn fit_ridge(k: &GramMatrix, labels: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Regularizer(lambda));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::Empty("ridge fit needs training points"));
    }
    if k.0.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "{}x{} kernel for {} labels",
            k.0.nrows(),
            k.0.ncols(),
            n
        )));
    }
    for &y in labels {
        check_label(y)?;
    }
    let a = &k.0 + DMatrix::identity(n, n) * lambda;
    let y = DVector::from_column_slice(labels);
    let alpha = match a.clone().cholesky() {
        Some(ch) => ch.solve(&y),
        None => a
            .clone()
            .lu()
            .solve(&y)
            .ok_or_else(|| Error::Solver("singular ridge system".into()))?,
    };
    let residual = (&a * &alpha - &y).amax();
    if !residual.is_finite() || residual > RESIDUAL_TOL {
        return Err(Error::Solver(format!("ridge residual {residual:e}")));
    }
    Ok(RidgeModel {
        alpha: alpha.as_slice().to_vec(),
        lambda,
        train: None,
    })
}

/// `sign(k_vec . alpha)` with ties going to `+1`.
pub fn predict(model: &RidgeModel, k_vec: &[f64]) -> Result<f64> {
    if k_vec.len() != model.alpha.len() {
        return Err(Error::Dimension(format!(
            "kernel vector of length {} for {} coefficients",
            k_vec.len(),
            model.alpha.len()
        )));
    }
    let s: f64 = k_vec.iter().zip(&model.alpha).map(|(k, a)| k * a).sum();
    Ok(if s >= 0.0 { 1.0 } else { -1.0 })
}

/// Fraction of rows of `cross` (eval x train kernel values) predicted correctly.
pub fn accuracy_from_cross(model: &RidgeModel, cross: &DMatrix<f64>, labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("accuracy needs evaluation points"));
    }
    if cross.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} kernel rows for {} labels",
            cross.nrows(),
            labels.len()
        )));
    }
    let mut correct = 0usize;
    let mut row = vec![0.0; cross.ncols()];
    for (i, &y) in labels.iter().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = cross[(i, j)];
        }
        if predict(model, &row)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Kernel values `K(x_eval, x_train)` in the given noise mode. With shots set,
/// entries are estimated row by row from `rng`.
pub fn cross_gram<R: Rng + ?Sized>(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    eval: &LabeledDataset,
    train: &LabeledDataset,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    noise.validate()?;
    let engine = KernelEngine::new(spec, noise.mode)?;
    let refs = crate::par::try_map(&train.features(), |x| engine.embed(theta, x))?;
    let queries = crate::par::try_map(&eval.features(), |x| engine.state(theta, x))?;
    let mut cross = engine.cross_from(&queries, &refs);
    if let Some(m) = noise.shots {
        for v in cross.iter_mut() {
            *v = crate::qkernel::shot_sample(crate::qkernel::KernelValue(*v), m, rng)?.get();
        }
    }
    Ok(cross)
}

/// Accuracy of a fitted model on `eval`, with kernel vectors computed in the
/// same noise mode as training.
pub fn score<R: Rng + ?Sized>(
    model: &RidgeModel,
    eval: &LabeledDataset,
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::Empty("accuracy needs evaluation points"));
    }
    let train = model
        .train
        .as_ref()
        .ok_or(Error::Empty("model has no training points attached"))?;
    let cross = cross_gram(spec, theta, eval, train, noise, rng)?;
    accuracy_from_cross(model, &cross, &eval.labels())
}

/// Fits on `train` and reports accuracy on `eval`.
pub fn fit_and_score<R: Rng + ?Sized>(
    train: &LabeledDataset,
    eval: &LabeledDataset,
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    noise: &NoiseModel,
    lambda: f64,
    rng: &mut R,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::Empty("ridge fit needs training points"));
    }
    let engine = KernelEngine::new(spec, noise.mode)?;
    let mut k = engine.gram(theta, &train.features())?;
    if let Some(m) = noise.shots {
        sample_gram(&mut k, m, rng)?;
    }
    let model = fit_ridge(&GramMatrix(k), &train.labels(), lambda)?.with_training(train.clone())?;
    score(&model, eval, spec, theta, noise, rng)
}
