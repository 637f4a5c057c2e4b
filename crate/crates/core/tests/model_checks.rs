use collneg::datasets::{self, feature_matrix, negativities};
use collneg::models::mlp::{self, MlpModel, TrainConfig};
use collneg::models::quadratic::{expand_quadratic, parameter_count};
use collneg::models::{Metrics, QuadraticModel};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference gradient of the batch loss, parameter by parameter.
fn finite_difference_gradient(model: &MlpModel, x: &Array2<f64>, y: &Array1<f64>, step: f64) -> Vec<f64> {
    let base = model.parameters();
    let mut probe = model.clone();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            plus[k] += step;
            probe.set_parameters(&plus).unwrap();
            let up = probe.mse(x.view(), y.view());
            let mut minus = base.clone();
            minus[k] -= step;
            probe.set_parameters(&minus).unwrap();
            let down = probe.mse(x.view(), y.view());
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn flatten(grads: &[mlp::LayerGradient]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied().collect::<Vec<_>>())
        .collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn gradient_check(dims: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = MlpModel::initialized(dims, &mut rng).unwrap();
    // shift biases off zero so no ReLU sits exactly at its kink
    let mut params = model.parameters();
    for p in params.iter_mut() {
        *p += rng.random_range(-0.05..0.05);
    }
    let model = MlpModel::from_parameters(dims, &params).unwrap();
    let x = Array2::from_shape_fn((6, dims[0]), |_| rng.random::<f64>());
    let y = Array1::from_shape_fn(6, |_| rng.random::<f64>());
    let (_, grads) = model.loss_and_gradient(x.view(), y.view());
    let numeric = finite_difference_gradient(&model, &x, &y, 1e-5);
    relative_error(&flatten(&grads), &numeric)
}

#[test]
fn backprop_matches_finite_differences_on_toy_net() {
    // (2, 1, 2, 1): 3 + 4 + 3 = 10 parameters
    let model = MlpModel::zeros(&[2, 1, 2, 1]).unwrap();
    assert_eq!(model.parameter_count(), 10);
    for seed in 0..5 {
        let err = gradient_check(&[2, 1, 2, 1], seed);
        assert!(err < 1e-5, "seed {seed}: {err:e}");
    }
}

#[test]
fn backprop_matches_finite_differences_across_layers() {
    for (seed, dims) in [(1, vec![5, 4, 3, 1]), (2, vec![10, 6, 5, 1]), (3, vec![7, 8, 1])] {
        let err = gradient_check(&dims, seed);
        assert!(err < 1e-5, "{dims:?}: {err:e}");
    }
}

#[test]
fn output_is_positive_for_random_weights_and_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let model = MlpModel::initialized(&[7, 5, 4, 1], &mut rng).unwrap();
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-5.0..5.0)).collect();
        assert!(model.forward(&x).unwrap() > 0.0);
    }
}

#[test]
fn small_network_memorizes_toy_set() {
    let ds = datasets::generate(100, 314, 1).unwrap();
    let x = feature_matrix(&ds.records, 10);
    let y = Array1::from(negativities(&ds.records)).mapv(|n| n * n);
    let cfg = TrainConfig {
        epochs: 2000,
        batch_size: 10,
        hidden: vec![16, 8],
        seed: 6,
        ..TrainConfig::default()
    };
    let trained = mlp::train(x.view(), y.view(), &cfg).unwrap();
    let mse = trained.model.mse(x.view(), y.view());
    assert!(mse < 1e-4, "training MSE {mse:e}");
    assert!(mse < trained.loss_history[0]);
    assert_eq!(trained.loss_history.len(), 2001);
}

#[test]
fn training_is_bit_reproducible() {
    let ds = datasets::generate(300, 2718, 1).unwrap();
    let x = feature_matrix(&ds.records, 7);
    let y = Array1::from(negativities(&ds.records)).mapv(|n| n * n);
    let cfg = TrainConfig { epochs: 5, batch_size: 32, hidden: vec![12, 6], seed: 11, ..TrainConfig::default() };
    let a = mlp::train(x.view(), y.view(), &cfg).unwrap();
    let b = mlp::train(x.view(), y.view(), &cfg).unwrap();
    assert_eq!(a.model.parameters(), b.model.parameters());
    assert_eq!(a.loss_history, b.loss_history);
    let other = mlp::train(x.view(), y.view(), &TrainConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.model.parameters(), other.model.parameters());
}

#[test]
fn quadratic_fit_ignores_row_order() {
    let ds = datasets::generate(600, 161, 1).unwrap();
    let rows: Vec<[f64; 10]> = ds.records.iter().map(|r| r.p).collect();
    let targets = negativities(&ds.records);
    let forward = QuadraticModel::fit(&rows, &targets, 8).unwrap();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.reverse();
    order.rotate_left(123);
    let shuffled_rows: Vec<[f64; 10]> = order.iter().map(|&i| rows[i]).collect();
    let shuffled_targets: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
    let permuted = QuadraticModel::fit(&shuffled_rows, &shuffled_targets, 8).unwrap();
    for r in &rows {
        let a = forward.predict_raw(r).unwrap();
        let b = permuted.predict_raw(r).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
    assert!(forward.residual_gradient(&rows, &targets) < 1e-6);
}

#[test]
fn quadratic_fit_on_generated_data_beats_the_mean() {
    let ds = datasets::generate(3000, 1618, 1).unwrap();
    let rows: Vec<[f64; 10]> = ds.records.iter().map(|r| r.p).collect();
    let targets = negativities(&ds.records);
    let model = QuadraticModel::fit(&rows, &targets, 10).unwrap();
    assert_eq!(model.theta().len(), parameter_count(10));
    let pred: Vec<f64> = rows.iter().map(|r| model.predict_raw(r).unwrap()).collect();
    let m = Metrics::compute(&targets, &pred).unwrap();
    assert!(m.r2 > 0.9, "{m:?}");
    // θ·x⃗ agrees with the explicit expansion
    let x = expand_quadratic(&rows[0]);
    let dot: f64 = x.iter().zip(model.theta()).map(|(a, b)| a * b).sum();
    assert_eq!(dot, pred[0]);
}

proptest! {
    #[test]
    fn residual_moments_satisfy_bias_variance_identity(
        pairs in proptest::collection::vec((0.0f64..1.0, -0.5f64..1.5), 2..200),
    ) {
        let actual: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let predicted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(actual.iter().any(|&a| a != actual[0]));
        let m = Metrics::compute(&actual, &predicted).unwrap();
        prop_assert!((m.tau * m.tau + m.mu * m.mu - m.mse).abs() < 1e-12);
        prop_assert!(m.r2 <= 1.0);
        prop_assert!(m.tau >= 0.0 && m.mse >= 0.0);
    }
}
