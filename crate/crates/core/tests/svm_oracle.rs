mod common;

use proptest::prelude::*;
use xgwo_svm::svm::{self, kkt_report, train_binary, KernelParams, SmoSettings};

#[test]
fn smo_matches_exact_dual_on_many_problems() {
    for seed in 100..300 {
        let (x, y, c, gamma) = common::random_binary_problem(seed, 7);
        let model = train_binary(&x, &y, KernelParams::new(c, gamma).unwrap(), &SmoSettings::default()).unwrap();
        let (oracle, _) = common::brute_force_dual(&x, &y, c, gamma);
        assert!((model.dual_objective - oracle).abs() <= 1e-4, "seed {seed}: {} vs {oracle}", model.dual_objective);
    }
}

#[test]
fn tight_tolerance_recovers_oracle_multipliers() {
    let settings = SmoSettings { tol: 1e-9, ..SmoSettings::default() };
    for seed in 0..40 {
        let (x, y, c, gamma) = common::random_binary_problem(seed, 6);
        let model = train_binary(&x, &y, KernelParams::new(c, gamma).unwrap(), &settings).unwrap();
        let (_, alpha) = common::brute_force_dual(&x, &y, c, gamma);
        let mut ours = vec![0.0; x.len()];
        for (&i, &coef) in model.support_indices.iter().zip(&model.dual_coefs) {
            ours[i] = coef * y[i];
        }
        for (a, b) in ours.iter().zip(&alpha) {
            assert!((a - b).abs() < 1e-5, "seed {seed}: {ours:?} vs {alpha:?}");
        }
    }
}

#[test]
fn decision_value_is_the_kernel_expansion() {
    let (x, y, c, gamma) = common::random_binary_problem(5, 8);
    let model = train_binary(&x, &y, KernelParams::new(c, gamma).unwrap(), &SmoSettings::default()).unwrap();
    let probe = [0.3, -0.7, 1.1];
    let p = &probe[..x[0].len()];
    let direct: f64 = model
        .support_vectors
        .iter()
        .zip(&model.dual_coefs)
        .map(|(sv, a)| a * common::gaussian_kernel(sv, p, gamma))
        .sum::<f64>()
        + model.bias;
    assert!((model.decision_value(p) - direct).abs() < 1e-12);
}

#[test]
fn multiclass_batch_matches_single_predictions() {
    let mut r = common::rng(3);
    use rand::Rng;
    let x: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let c = (i % 3) as f64;
            vec![c * 3.0 + r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]
        })
        .collect();
    let y: Vec<usize> = (0..60).map(|i| i % 3 + 1).collect();
    let model = svm::train_multiclass(&x, &y, KernelParams::new(5.0, 0.5).unwrap(), &SmoSettings::default()).unwrap();
    let batch = model.predict_all(&x).unwrap();
    for (xi, b) in x.iter().zip(&batch) {
        assert_eq!(model.predict(xi).unwrap(), *b);
    }
    let acc = batch.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 60.0;
    assert!(acc > 0.9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trained_models_are_kkt_feasible(seed in 0u64..10_000) {
        let (x, y, c, gamma) = common::random_binary_problem(seed, 8);
        let settings = SmoSettings::default();
        let model = train_binary(&x, &y, KernelParams::new(c, gamma).unwrap(), &settings).unwrap();
        let report = kkt_report(&model, &x, &y, settings.tol);
        prop_assert!(report.feasible, "{report:?}");
        prop_assert!(model.dual_objective >= -1e-12);
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(seed in 0u64..10_000) {
        let (x, _, _, gamma) = common::random_binary_problem(seed, 8);
        let n = x.len();
        // Cholesky with a small jitter succeeds only for PSD input.
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let k = svm::rbf_kernel(&x[i], &x[j], gamma).unwrap() + if i == j { 1e-10 } else { 0.0 };
                let s: f64 = (0..j).map(|m| l[i][m] * l[j][m]).sum();
                if i == j {
                    prop_assert!(k - s > 0.0);
                    l[i][j] = (k - s).sqrt();
                } else {
                    l[i][j] = (k - s) / l[j][j];
                }
            }
        }
    }
}
