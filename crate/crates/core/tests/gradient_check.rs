//! Backprop gradient against central finite differences.

mod common;

use common::{finite_difference, gradient_sweep, max_relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vowelrec::mlp::{gradient, Batch, MlpModel};

#[test]
fn toy_4_3_2_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let model = MlpModel::init(4, 3, 2, 1);
    let mut batch = Batch::default();
    for _ in 0..5 {
        let x = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        batch.push(x, t);
    }
    let analytic = gradient(&model, &batch, 0.5).unwrap();
    let numeric = finite_difference(&model, &batch, 0.5);
    assert!(max_relative_error(&analytic, &numeric) <= 1e-5);
}

#[test]
fn random_small_networks() {
    let worst = gradient_sweep(150, 2024);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn pure_weight_decay_gradient_is_scaled_params() {
    let model = MlpModel::init(3, 2, 2, 9);
    let mut batch = Batch::default();
    batch.push(vec![0.1, 0.2, 0.3], vec![1.0, 0.0]);
    let g = gradient(&model, &batch, 1.0).unwrap();
    let n = model.n_params() as f64;
    for (gi, wi) in g.iter().zip(model.params()) {
        assert!((gi - 2.0 * wi / n).abs() < 1e-12);
    }
}
