use dqk::learn::{
    alignment, alignment_with_gradient, fit_and_score, fit_ridge, gram, ideal_gram, loss, loss_and_grad, loss_grad,
    noisy_alignment_grad_analytic, predict, GramMatrix, LabeledDataset,
};
use dqk::qkernel::{analytic_noisy_kernel, FeatureMapSpec, KernelEngine, NoiseMode, NoiseModel, ParameterVector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(rng: &mut ChaCha8Rng, n: usize) -> LabeledDataset {
    let xs = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let ys = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    LabeledDataset::from_parts(xs, ys).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, t: usize) -> ParameterVector {
    ParameterVector((0..t).map(|_| rng.random_range(-3.0..3.0)).collect())
}

fn no_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[test]
fn gram_diagonals() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = FeatureMapSpec::alternating(3, 2).unwrap();
    let data = random_data(&mut rng, 6);
    let theta = random_theta(&mut rng, spec.n_params());
    let k = gram(&spec, &theta, &data, &NoiseModel::exact(), &mut no_rng()).unwrap();
    for i in 0..6 {
        assert!((k.get(i, i) - 1.0).abs() < 1e-10);
    }
    let p = 0.3;
    let k = gram(&spec, &theta, &data, &NoiseModel::global(p), &mut no_rng()).unwrap();
    for i in 0..6 {
        assert!((k.get(i, i) - (1.0 - p + p / 8.0)).abs() < 1e-10);
    }
    let k = gram(&spec, &theta, &data, &NoiseModel::per_gate(0.02), &mut no_rng()).unwrap();
    assert!(k.asymmetry() < 1e-9);
    assert!(k.0.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn exact_gram_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = FeatureMapSpec::alternating(4, 3).unwrap();
    let data = random_data(&mut rng, 8);
    let theta = random_theta(&mut rng, spec.n_params());
    let k = gram(&spec, &theta, &data, &NoiseModel::exact(), &mut no_rng()).unwrap();
    assert!(k.min_eigenvalue() >= -1e-8);
}

#[test]
fn shot_gram_is_symmetric_and_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = FeatureMapSpec::alternating(2, 1).unwrap();
    let data = random_data(&mut rng, 4);
    let theta = random_theta(&mut rng, spec.n_params());
    let noise = NoiseModel::exact().with_shots(100);
    let a = gram(&spec, &theta, &data, &noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = gram(&spec, &theta, &data, &noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.asymmetry(), 0.0);
}

#[test]
fn loss_grad_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = FeatureMapSpec::alternating(3, 2).unwrap();
    let data = random_data(&mut rng, 4);
    let theta = random_theta(&mut rng, spec.n_params());
    let h = 1e-5;
    for noise in [NoiseModel::exact(), NoiseModel::per_gate(0.01), NoiseModel::global(0.2)] {
        let g = loss_grad(&data, &theta, &spec, &noise).unwrap();
        for t in 0..spec.n_params() {
            let mut tp = theta.clone();
            tp.0[t] += h;
            let mut tm = theta.clone();
            tm.0[t] -= h;
            let fd = (loss(&data, &tp, &spec, &noise, &mut no_rng()).unwrap()
                - loss(&data, &tm, &spec, &noise, &mut no_rng()).unwrap())
                / (2.0 * h);
            assert!((fd - g[t]).abs() < 1e-6, "{noise:?} t={t}: {fd} vs {}", g[t]);
        }
    }
}

#[test]
fn loss_bounds_and_shots_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = FeatureMapSpec::alternating(2, 2).unwrap();
    let data = random_data(&mut rng, 6);
    let theta = random_theta(&mut rng, spec.n_params());
    let l = loss(&data, &theta, &spec, &NoiseModel::exact(), &mut no_rng()).unwrap();
    assert!((-1.0..=1.0).contains(&l));
    assert!(loss_grad(&data, &theta, &spec, &NoiseModel::exact().with_shots(10)).is_err());
}

#[test]
fn constant_kernel_with_equal_labels_is_stationary() {
    let y = [1.0; 4];
    let k = DMatrix::from_element(4, 4, 0.6);
    let (a, d) = alignment_with_gradient(&k, &y).unwrap();
    assert!((a - 1.0).abs() < 1e-12);
    // Any perturbation that keeps K constant leaves A unchanged.
    let total: f64 = d.iter().sum();
    assert!(total.abs() < 1e-12);
}

#[test]
fn gradient_descent_reduces_loss_on_two_points() {
    let spec = FeatureMapSpec::alternating(2, 2).unwrap();
    let data = LabeledDataset::from_parts(vec![vec![0.1, 0.8], vec![0.9, 0.2]], vec![1.0, -1.0]).unwrap();
    let mut theta = ParameterVector(vec![0.3, -0.2, 0.5, 0.1]);
    let noise = NoiseModel::exact();
    let mut prev = f64::INFINITY;
    for _ in 0..15 {
        let r = loss_and_grad(&data, &theta, &spec, &noise).unwrap();
        assert!(r.loss <= prev + 1e-12);
        prev = r.loss;
        for (t, g) in theta.0.iter_mut().zip(&r.grad) {
            *t -= 0.05 * g;
        }
    }
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    let k = &b * b.transpose() / n as f64;
    let dk = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    let dk = (&dk + dk.transpose()) * 0.5;
    (k, dk)
}

fn plain_derivative(k: &DMatrix<f64>, dk: &DMatrix<f64>, y: &[f64]) -> f64 {
    let (_, d) = alignment_with_gradient(k, y).unwrap();
    d.component_mul(dk).sum()
}

#[test]
fn analytic_noisy_gradient_noiseless_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
    let (k, dk) = random_psd(&mut rng, 6);
    let a = noisy_alignment_grad_analytic(&GramMatrix(k.clone()), &dk, 0.0, 8, &y).unwrap();
    assert!((a - plain_derivative(&k, &dk, &y)).abs() < 1e-14);
}

#[test]
fn analytic_noisy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y = [1.0, 1.0, -1.0, -1.0];
    let (k, dk) = random_psd(&mut rng, 4);
    let d = 32;
    let h = 1e-6;
    for p in [0.1, 0.5, 0.9] {
        let noisy = |s: f64| {
            let m = DMatrix::from_fn(4, 4, |i, j| analytic_noisy_kernel(k[(i, j)] + s * dk[(i, j)], p, d).unwrap().get());
            alignment(&GramMatrix(m), &y).unwrap()
        };
        let fd = (noisy(h) - noisy(-h)) / (2.0 * h);
        let a = noisy_alignment_grad_analytic(&GramMatrix(k.clone()), &dk, p, d, &y).unwrap();
        assert!((fd - a).abs() < 1e-8, "p={p}: {fd} vs {a}");
    }
}

#[test]
fn analytic_noisy_gradient_shrinks_with_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    for _ in 0..5 {
        let (k, dk) = random_psd(&mut rng, 8);
        let gk = GramMatrix(k.clone());
        let base = plain_derivative(&k, &dk, &y).abs();
        let mut prev = f64::INFINITY;
        for p in [0.9, 0.99, 0.999] {
            let v = noisy_alignment_grad_analytic(&gk, &dk, p, 32, &y).unwrap().abs();
            assert!(v < prev);
            prev = v;
        }
        for p in [0.5, 0.9, 0.99] {
            let v = noisy_alignment_grad_analytic(&gk, &dk, p, 32, &y).unwrap().abs();
            assert!(v <= base + 1e-15);
        }
    }
}

#[test]
fn global_noise_gradient_vanishes_near_full_depolarization() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spec = FeatureMapSpec::alternating(5, 2).unwrap();
    let data = random_data(&mut rng, 8);
    let theta = random_theta(&mut rng, spec.n_params());
    let clean = loss_grad(&data, &theta, &spec, &NoiseModel::exact()).unwrap();
    let noisy = loss_grad(&data, &theta, &spec, &NoiseModel::global(0.999)).unwrap();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(&noisy) < norm(&clean));
    // Each component agrees with the analytic expression built from the
    // noiseless kernel and its entrywise derivative.
    let engine = KernelEngine::new(&spec, NoiseMode::Exact).unwrap();
    let k = engine.gram(&theta, &data.features()).unwrap();
    let y = data.labels();
    let h = 1e-5;
    for t in [0, 3, 7] {
        let mut tp = theta.clone();
        tp.0[t] += h;
        let mut tm = theta.clone();
        tm.0[t] -= h;
        let dk = (engine.gram(&tp, &data.features()).unwrap() - engine.gram(&tm, &data.features()).unwrap()) / (2.0 * h);
        let a = noisy_alignment_grad_analytic(&GramMatrix(k.clone()), &dk, 0.999, spec.dim(), &y).unwrap();
        assert!((a + noisy[t]).abs() < 1e-7, "t={t}: {a} vs {}", -noisy[t]);
    }
}

#[test]
fn ridge_reproduces_ideal_labels() {
    let y = [1.0, -1.0, -1.0, 1.0, 1.0];
    let k = ideal_gram(&y).unwrap();
    for lambda in [1.0, 0.3, 1e-3] {
        let m = fit_ridge(&k, &y, lambda).unwrap();
        for i in 0..y.len() {
            let row: Vec<f64> = (0..y.len()).map(|j| k.get(i, j)).collect();
            assert_eq!(predict(&m, &row).unwrap(), y[i]);
        }
    }
}

#[test]
fn ridge_score_complements_under_flip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = FeatureMapSpec::alternating(2, 2).unwrap();
    let train = random_data(&mut rng, 10);
    let eval = random_data(&mut rng, 9);
    let theta = random_theta(&mut rng, spec.n_params());
    let noise = NoiseModel::per_gate(0.01);
    let a = fit_and_score(&train, &eval, &spec, &theta, &noise, 0.1, &mut no_rng()).unwrap();
    let b = fit_and_score(&train, &eval.flipped(), &spec, &theta, &noise, 0.1, &mut no_rng()).unwrap();
    assert!((a + b - 1.0).abs() < 1e-12);
    let c = fit_and_score(&train, &train, &spec, &theta, &NoiseModel::exact(), 1e-3, &mut no_rng()).unwrap();
    assert!((0.0..=1.0).contains(&c));
}
