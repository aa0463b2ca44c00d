use gramscore_core::model::*;
use gramscore_core::synth::{self, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn texts(n: usize, seed: u64) -> Vec<String> {
    synth::generate(
        &SynthConfig {
            n_samples: n,
            seed,
            ..SynthConfig::default()
        },
        "m",
    )
    .unwrap()
    .into_iter()
    .map(|s| s.text)
    .collect()
}

fn random_batch<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> Vec<Example<'a>> {
    let size = rng.random_range(1..=12);
    (0..size)
        .map(|_| Example {
            text: &pool[rng.random_range(0..pool.len())],
            target: rng.random_range(1.0..=5.0),
            weight: rng.random_range(0.0..=1.0),
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let pool = texts(60, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for b in 0..10 {
        let model = FeaturizerModel::new(FeaturizerConfig {
            seed: b,
            init_scale: 1.0,
            ..FeaturizerConfig::default()
        });
        let batch = random_batch(&mut rng, &pool);
        let (_, grad) = model.loss_and_gradient(&batch).unwrap();
        let theta = model.flat_params();
        let mut probe = model.clone();
        for k in 0..theta.len() {
            let h = 1e-5 * theta[k].abs().max(1.0);
            let mut plus = theta.clone();
            plus[k] += h;
            probe.set_flat_params(&plus);
            let lp = probe.batch_loss(&batch).unwrap();
            let mut minus = theta.clone();
            minus[k] -= h;
            probe.set_flat_params(&minus);
            let lm = probe.batch_loss(&batch).unwrap();
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn predict_batch_agrees_with_predict() {
    let pool = texts(5, 2);
    let refs: Vec<&str> = pool.iter().map(String::as_str).collect();
    let m = FeaturizerModel::new(FeaturizerConfig {
        init_scale: 0.5,
        ..FeaturizerConfig::default()
    });
    let batch = m.predict_batch(&refs).unwrap();
    for (t, p) in refs.iter().zip(&batch) {
        assert_eq!(m.predict(t).unwrap(), *p);
    }
}

#[test]
fn snapshot_restore_round_trip() {
    let pool = texts(20, 3);
    let mut m = FeaturizerModel::new(FeaturizerConfig::default());
    let snap = m.snapshot();
    let before = m.predict(&pool[0]).unwrap();
    let batch: Vec<Example<'_>> = pool
        .iter()
        .map(|t| Example {
            text: t,
            target: 4.0,
            weight: 1.0,
        })
        .collect();
    m.train_step(&batch, 0.05).unwrap();
    assert_ne!(m.predict(&pool[0]).unwrap(), before);
    m.restore(snap);
    assert_eq!(m.predict(&pool[0]).unwrap(), before);
}

#[test]
fn unit_weights_give_plain_mse() {
    let pool = texts(30, 4);
    let mut m = FeaturizerModel::new(FeaturizerConfig {
        init_scale: 0.3,
        ..FeaturizerConfig::default()
    });
    let targets: Vec<f64> = (0..pool.len()).map(|i| 1.0 + (i % 5) as f64).collect();
    let batch: Vec<Example<'_>> = pool
        .iter()
        .zip(&targets)
        .map(|(t, &y)| Example {
            text: t,
            target: y,
            weight: 1.0,
        })
        .collect();
    let mse = pool
        .iter()
        .zip(&targets)
        .map(|(t, y)| (m.predict(t).unwrap() - y).powi(2))
        .sum::<f64>()
        / pool.len() as f64;
    let loss = m.train_step(&batch, 0.01).unwrap();
    assert!((loss - mse).abs() < 1e-12);
}

#[test]
fn zero_weight_content_has_no_effect() {
    let pool = texts(10, 5);
    let run = |text: &str, target: f64| {
        let mut m = FeaturizerModel::new(FeaturizerConfig::default());
        let batch = [
            Example {
                text: &pool[0],
                target: 4.0,
                weight: 0.5,
            },
            Example {
                text,
                target,
                weight: 0.0,
            },
            Example {
                text: &pool[1],
                target: 2.0,
                weight: 0.5,
            },
        ];
        m.train_step(&batch, 0.3).unwrap();
        m.snapshot()
    };
    assert_eq!(run(&pool[2], 1.0), run(&pool[3], 5.0));
}

#[test]
fn omitting_zero_weight_sample_matches_after_rescaling_step() {
    let pool = texts(10, 6);
    let with = |lr: f64, include: bool| {
        let mut m = FeaturizerModel::new(FeaturizerConfig::default());
        let mut batch = vec![
            Example {
                text: &pool[0],
                target: 4.0,
                weight: 0.5,
            },
            Example {
                text: &pool[1],
                target: 2.0,
                weight: 0.5,
            },
        ];
        if include {
            batch.push(Example {
                text: &pool[2],
                target: 1.0,
                weight: 0.0,
            });
        }
        m.train_step(&batch, lr).unwrap();
        m.predict(&pool[4]).unwrap()
    };
    // The batch mean divides by |B|, so dropping a member rescales the step.
    let a = with(0.3, true);
    let b = with(0.3 * 2.0 / 3.0, false);
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn seeded_initialization_is_reproducible() {
    let a = FeaturizerModel::new(FeaturizerConfig {
        seed: 5,
        ..FeaturizerConfig::default()
    });
    let b = FeaturizerModel::new(FeaturizerConfig {
        seed: 5,
        ..FeaturizerConfig::default()
    });
    assert_eq!(a.snapshot(), b.snapshot());
}

proptest! {
    #[test]
    fn features_are_a_pure_function_of_text(seed in 0u64..500) {
        let pool = texts(1, seed);
        let a = FeaturizerModel::new(FeaturizerConfig::default());
        let b = FeaturizerModel::new(FeaturizerConfig { seed: 1, ..FeaturizerConfig::default() });
        prop_assert_eq!(a.features(&pool[0]).unwrap(), b.features(&pool[0]).unwrap());
        a.clear_feature_cache();
        prop_assert_eq!(a.features(&pool[0]).unwrap(), b.features(&pool[0]).unwrap());
    }
}
