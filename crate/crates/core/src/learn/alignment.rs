use nalgebra::DMatrix;
use rand::Rng;

use super::dataset::{check_label, LabeledDataset};
use crate::qkernel::{shot_sample, FeatureMapSpec, KernelEngine, KernelValue, NoiseModel, ParameterVector};
use crate::{Error, Result};

/// Smallest `sum K_ij^2` accepted by [`alignment`].
pub const DEGENERATE_EPS: f64 = 1e-24;

/// A square kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(pub DMatrix<f64>);

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Largest `|K_ij - K_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn rank(&self, tol: f64) -> usize {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().filter(|v| v.abs() > tol).count()
    }
}

/// Replaces each upper-triangle entry by its `m`-shot estimate, mirrored.
pub(crate) fn sample_gram<R: Rng + ?Sized>(k: &mut DMatrix<f64>, shots: u32, rng: &mut R) -> Result<()> {
    let n = k.nrows();
    for i in 0..n {
        for j in i..n {
            let v = shot_sample(KernelValue(k[(i, j)]), shots, rng)?.get();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(())
}

/// Kernel matrix of `data` under `noise`. With shots set, each unordered pair
/// is estimated once from `rng`, in row-major upper-triangle order.
pub fn gram<R: Rng + ?Sized>(
    spec: &FeatureMapSpec,
    theta: &ParameterVector,
    data: &LabeledDataset,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<GramMatrix> {
    if data.is_empty() {
        return Err(Error::Empty("gram needs at least one point"));
    }
    noise.validate()?;
    let engine = KernelEngine::new(spec, noise.mode)?;
    let mut k = engine.gram(theta, &data.features())?;
    if let Some(m) = noise.shots {
        sample_gram(&mut k, m, rng)?;
    }
    Ok(GramMatrix(k))
}

/// `K*_ij = y_i y_j`.
pub fn ideal_gram(labels: &[f64]) -> Result<GramMatrix> {
    for &y in labels {
        check_label(y)?;
    }
    let n = labels.len();
    Ok(GramMatrix(DMatrix::from_fn(n, n, |i, j| labels[i] * labels[j])))
}

fn check_sizes(k: &DMatrix<f64>, labels: &[f64]) -> Result<()> {
    if !k.is_square() || k.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{}x{} kernel for {} labels",
            k.nrows(),
            k.ncols(),
            labels.len()
        )));
    }
    for &y in labels {
        check_label(y)?;
    }
    Ok(())
}

/// `sum_ij y_i y_j K_ij / (n sqrt(sum_ij K_ij^2))`, diagonal included.
pub fn alignment(k: &GramMatrix, labels: &[f64]) -> Result<f64> {
    alignment_with_gradient(&k.0, labels).map(|(a, _)| a)
}

/// Alignment and its partial derivatives with respect to every entry `K_ij`.
pub fn alignment_with_gradient(k: &DMatrix<f64>, labels: &[f64]) -> Result<(f64, DMatrix<f64>)> {
    check_sizes(k, labels)?;
    let n = labels.len();
    let mut s = 0.0;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += labels[i] * labels[j] * k[(i, j)];
            q += k[(i, j)] * k[(i, j)];
        }
    }
    if q < DEGENERATE_EPS {
        return Err(Error::DegenerateKernel(q));
    }
    let nf = n as f64;
    let root = q.sqrt();
    let a = s / (nf * root);
    let d = DMatrix::from_fn(n, n, |i, j| {
        labels[i] * labels[j] / (nf * root) - s * k[(i, j)] / (nf * q * root)
    });
    Ok((a, d))
}

/// `-alignment(gram(...))`.
pub fn loss<R: Rng + ?Sized>(
    data: &LabeledDataset,
    theta: &ParameterVector,
    spec: &FeatureMapSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<f64> {
    let k = gram(spec, theta, data, noise, rng)?;
    Ok(-alignment(&k, &data.labels())?)
}

/// Loss, alignment, Gram matrix and loss gradient from one batched pass.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub alignment: f64,
    pub gram: GramMatrix,
    pub grad: Vec<f64>,
}

/// Gradient of the loss with respect to every trainable angle.
///
/// Entrywise kernel gradients from the parameter-shift rule are combined by
/// the quotient rule for the alignment; with noisy kernels this is the
/// gradient of the noisy alignment.
pub fn loss_grad(
    data: &LabeledDataset,
    theta: &ParameterVector,
    spec: &FeatureMapSpec,
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    loss_and_grad(data, theta, spec, noise).map(|r| r.grad)
}

pub fn loss_and_grad(
    data: &LabeledDataset,
    theta: &ParameterVector,
    spec: &FeatureMapSpec,
    noise: &NoiseModel,
) -> Result<LossGrad> {
    noise.validate()?;
    if noise.shots.is_some() {
        return Err(Error::ShotsInGradient);
    }
    if data.len() < 2 {
        return Err(Error::Empty("alignment training needs at least two points"));
    }
    let labels = data.labels();
    let engine = KernelEngine::new(spec, noise.mode)?;
    let (k, a, grad) = engine.gram_with_gradient(theta, &data.features(), |k| alignment_with_gradient(k, &labels))?;
    Ok(LossGrad {
        loss: -a,
        alignment: a,
        gram: GramMatrix(k),
        grad: grad.into_iter().map(|g| -g).collect(),
    })
}

/// Alignment gradient under global depolarizing noise, written in terms of the
/// noiseless kernel `K` and its derivative `dK` for one parameter:
///
/// ```text
/// sum y y dK / (n sqrt(sum (K + s)^2))
///   - (sum y y K) sum (K + s) dK / (n (sum (K + s)^2)^(3/2)),   s = p / ((1-p) D)
/// ```
///
/// Valid for balanced labels, where `sum_ij y_i y_j = 0`.
pub fn noisy_alignment_grad_analytic(
    k: &GramMatrix,
    dk: &DMatrix<f64>,
    p: f64,
    dim: usize,
    labels: &[f64],
) -> Result<f64> {
    check_sizes(&k.0, labels)?;
    if dk.shape() != k.0.shape() {
        return Err(Error::Dimension("dK shape differs from K".into()));
    }
    crate::qsim::check_probability(p)?;
    if p >= 1.0 {
        return Err(Error::SingularNoise);
    }
    let pos = labels.iter().filter(|&&y| y > 0.0).count();
    let neg = labels.len() - pos;
    if pos != neg {
        return Err(Error::Unbalanced {
            positive: pos,
            negative: neg,
        });
    }
    let n = labels.len();
    let shift = p / ((1.0 - p) * dim as f64);
    let (mut yy_dk, mut yy_k, mut q, mut cross) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let yy = labels[i] * labels[j];
            let ks = k.0[(i, j)] + shift;
            yy_dk += yy * dk[(i, j)];
            yy_k += yy * k.0[(i, j)];
            q += ks * ks;
            cross += ks * dk[(i, j)];
        }
    }
    if q < DEGENERATE_EPS {
        return Err(Error::DegenerateKernel(q));
    }
    let nf = n as f64;
    Ok(yy_dk / (nf * q.sqrt()) - yy_k * cross / (nf * q.powf(1.5)))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn ideal_gram_examples() {
        let k = ideal_gram(&[1.0, 1.0]).unwrap();
        assert_eq!(k.0, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        let k = ideal_gram(&[1.0, -1.0]).unwrap();
        assert_eq!(k.0, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let k = ideal_gram(&[1.0, -1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(k.rank(1e-9), 1);
        assert!(k.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn alignment_examples() {
        let y = [1.0, -1.0, 1.0];
        assert_relative_eq!(alignment(&ideal_gram(&y).unwrap(), &y).unwrap(), 1.0, epsilon = 1e-15);
        let id = GramMatrix(DMatrix::identity(2, 2));
        let a = alignment(&id, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(a, 2.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-15);
        let neg = GramMatrix(-ideal_gram(&y).unwrap().0);
        assert_relative_eq!(alignment(&neg, &y).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_kernel_is_an_error() {
        let zero = GramMatrix(DMatrix::zeros(2, 2));
        assert!(matches!(alignment(&zero, &[1.0, -1.0]), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn entrywise_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        let k = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let y = [1.0, -1.0, -1.0, 1.0, 1.0];
        let (_, d) = alignment_with_gradient(&k, &y).unwrap();
        let h = 1e-6;
        for i in 0..n {
            for j in 0..n {
                let mut kp = k.clone();
                kp[(i, j)] += h;
                let mut km = k.clone();
                km[(i, j)] -= h;
                let fd = (alignment(&GramMatrix(kp), &y).unwrap() - alignment(&GramMatrix(km), &y).unwrap()) / (2.0 * h);
                assert!((fd - d[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn analytic_gradient_rejects_bad_inputs() {
        let k = GramMatrix(DMatrix::identity(2, 2));
        let dk = DMatrix::zeros(2, 2);
        assert!(matches!(
            noisy_alignment_grad_analytic(&k, &dk, 1.0, 4, &[1.0, -1.0]),
            Err(Error::SingularNoise)
        ));
        assert!(matches!(
            noisy_alignment_grad_analytic(&k, &dk, 0.1, 4, &[1.0, 1.0]),
            Err(Error::Unbalanced { .. })
        ));
    }
}
