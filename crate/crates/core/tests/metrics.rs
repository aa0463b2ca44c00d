use gramscore_core::dataset::{Dataset, Modality, Record, Sample, Split};
use gramscore_core::metrics::*;
use gramscore_core::model::{FeaturizerConfig, FeaturizerModel, RegressionModel};
use gramscore_core::synth::{self, SynthConfig};
use gramscore_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn round_level(x: f64) -> i64 {
    // Half away from zero, then clamp.
    let r = if x >= 0.0 { (x + 0.5).floor() } else { (x - 0.5).ceil() };
    (r as i64).clamp(1, 5)
}

/// Kappa from pairwise disagreement: sum over all (a, b) pairs of squared
/// level differences, observed within pairs and expected across them.
fn qwk_oracle(pred: &[f64], gold: &[f64]) -> f64 {
    let p: Vec<i64> = pred.iter().map(|&x| round_level(x)).collect();
    let g: Vec<i64> = gold.iter().map(|&x| round_level(x)).collect();
    let n = p.len() as f64;
    let observed: f64 = p.iter().zip(&g).map(|(a, b)| ((a - b) * (a - b)) as f64).sum::<f64>() / n;
    let mut expected = 0.0;
    for a in &p {
        for b in &g {
            expected += ((a - b) * (a - b)) as f64;
        }
    }
    expected /= n * n;
    if expected == 0.0 {
        return 1.0;
    }
    1.0 - observed / expected
}

fn plcc_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn rank_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn rmse_oracle(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += (x[i] - y[i]).powi(2);
    }
    (acc / x.len() as f64).sqrt()
}

#[test]
fn oracle_equivalence_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..500 {
        let n = rng.random_range(2..=60);
        let (pred, gold): (Vec<f64>, Vec<f64>) = if case % 2 == 0 {
            (
                (0..n).map(|_| rng.random_range(1..=5) as f64).collect(),
                (0..n).map(|_| rng.random_range(1..=5) as f64).collect(),
            )
        } else {
            (
                (0..n).map(|_| rng.random_range(0.0..6.0)).collect(),
                (0..n).map(|_| (rng.random_range(2..=10) as f64) / 2.0).collect(),
            )
        };
        let q = qwk(&pred, &gold, RoundingPolicy::NearestIntegerClamped);
        match q {
            Ok(v) => assert!((v - qwk_oracle(&pred, &gold)).abs() < TOL, "case {case}"),
            Err(e) => assert_eq!(e, Error::UndefinedCorrelation("qwk")),
        }
        match plcc(&pred, &gold) {
            Ok(v) => assert!((v - plcc_oracle(&pred, &gold)).abs() < TOL, "case {case}"),
            Err(_) => assert!(pred.iter().all(|&x| x == pred[0]) || gold.iter().all(|&x| x == gold[0])),
        }
        if let Ok(v) = srcc(&pred, &gold) {
            let o = plcc_oracle(&rank_oracle(&pred), &rank_oracle(&gold));
            assert!((v - o).abs() < TOL, "case {case}");
        }
        assert!((rmse(&pred, &gold).unwrap() - rmse_oracle(&pred, &gold)).abs() < TOL);
    }
}

#[test]
fn reference_values() {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(qwk(&a, &a, RoundingPolicy::None).unwrap(), 1.0);
    assert_eq!(qwk(&[5.0, 1.0], &[1.0, 5.0], RoundingPolicy::None).unwrap(), -1.0);
    assert_eq!(qwk(&[3.0, 3.0], &[3.0, 3.0], RoundingPolicy::None).unwrap(), 1.0);
    let s = srcc(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((s - plcc_oracle(&[1.5, 1.5, 3.0], &[1.0, 2.0, 3.0])).abs() < TOL);
    assert_eq!(rmse(&[3.0], &[5.0]).unwrap(), 2.0);
    assert!((rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
    assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    assert!(qwk(&[4.5], &[4.0], RoundingPolicy::None).is_err());
}

#[test]
fn half_scores_round_away_from_zero() {
    assert_eq!(RoundingPolicy::NearestIntegerClamped.level(4.5).unwrap(), 4);
    assert_eq!(RoundingPolicy::NearestIntegerClamped.level(2.5).unwrap(), 2);
    assert_eq!(RoundingPolicy::NearestIntegerClamped.level(7.2).unwrap(), 4);
    assert_eq!(RoundingPolicy::NearestIntegerClamped.level(-3.0).unwrap(), 0);
}

fn int_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((1u8..=5).prop_map(f64::from), n)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| (int_vec(n), int_vec(n)))
}

proptest! {
    #[test]
    fn qwk_is_symmetric((a, b) in pair()) {
        let ab = qwk(&a, &b, RoundingPolicy::None);
        let ba = qwk(&b, &a, RoundingPolicy::None);
        match (ab, ba) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }

    #[test]
    fn qwk_self_agreement_is_one(a in (1usize..40).prop_flat_map(int_vec)) {
        prop_assert_eq!(qwk(&a, &a, RoundingPolicy::None).unwrap(), 1.0);
    }

    #[test]
    fn qwk_is_bounded((a, b) in pair()) {
        if let Ok(k) = qwk(&a, &b, RoundingPolicy::None) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        }
    }

    #[test]
    fn plcc_affine_invariance(
        x in prop::collection::vec(-10.0f64..10.0, 3..30),
        y_seed in any::<u64>(),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(y_seed);
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-3.0..3.0)).collect();
        if let Ok(r) = plcc(&x, &y) {
            let t: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            prop_assert!((plcc(&t, &y).unwrap() - r).abs() < 1e-9);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((plcc(&neg, &y).unwrap() + r).abs() < 1e-9);
        }
    }

    #[test]
    fn srcc_monotone_invariance(
        x in prop::collection::vec(-3.0f64..3.0, 3..30),
        y in prop::collection::vec(-3.0f64..3.0, 30),
    ) {
        let y = &y[..x.len()];
        if let Ok(r) = srcc(&x, y) {
            let t: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + v.powi(3)).collect();
            prop_assert!((srcc(&t, y).unwrap() - r).abs() < 1e-12);
            prop_assert!((srcc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_zero_iff_equal(a in prop::collection::vec(1.0f64..5.0, 1..30), bump in 0usize..30) {
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[bump % a.len()] += 0.5;
        prop_assert!(rmse(&a, &b).unwrap() > 0.0);
    }
}

struct Fixed(Vec<(String, f64)>);

impl RegressionModel for Fixed {
    type Params = ();
    fn predict(&self, text: &str) -> gramscore_core::Result<f64> {
        Ok(self.0.iter().find(|(t, _)| t == text).map(|(_, v)| *v).unwrap_or(3.0))
    }
    fn train_step(&mut self, _: &[gramscore_core::model::Example<'_>], _: f64) -> gramscore_core::Result<f64> {
        Ok(0.0)
    }
    fn snapshot(&self) {}
    fn restore(&mut self, _: ()) {}
}

fn rated(golds: &[f64]) -> Dataset {
    let records = golds
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let s = Sample::new(
                format!("s{i}"),
                format!("c{i}"),
                format!("text number {i}"),
                Modality::Written,
            )
            .unwrap();
            Record::rated(s, vec![g]).unwrap()
        })
        .collect();
    Dataset::new(records, Split::Test).unwrap()
}

#[test]
fn evaluate_with_oracle_and_constant_models() {
    let golds = [1.0, 2.5, 4.0, 5.0, 3.5];
    let ds = rated(&golds);
    let oracle = Fixed(
        ds.records
            .iter()
            .map(|r| (r.sample.text.clone(), r.gold_score().unwrap()))
            .collect(),
    );
    let rep = evaluate(&oracle, &ds, RoundingPolicy::NearestIntegerClamped).unwrap();
    assert_eq!(
        (rep.qwk, rep.plcc, rep.srcc, rep.rmse, rep.n),
        (1.0, Some(1.0), Some(1.0), 0.0, 5)
    );

    let constant = Fixed(Vec::new());
    let rep = evaluate(&constant, &ds, RoundingPolicy::NearestIntegerClamped).unwrap();
    assert_eq!(rep.plcc, None);
    assert_eq!(rep.srcc, None);
    let spread = (golds.iter().map(|g| (g - 3.0) * (g - 3.0)).sum::<f64>() / 5.0).sqrt();
    assert!((rep.rmse - spread).abs() < 1e-12);
}

#[test]
fn evaluate_decomposes_into_metric_calls() {
    let samples = synth::generate(
        &SynthConfig {
            n_samples: 80,
            seed: 4,
            ..SynthConfig::default()
        },
        "e",
    )
    .unwrap();
    let ds = synth::rated(&samples, Split::Test).unwrap();
    let m = FeaturizerModel::new(FeaturizerConfig {
        init_scale: 2.0,
        ..FeaturizerConfig::default()
    });
    let rep = evaluate(&m, &ds, RoundingPolicy::NearestIntegerClamped).unwrap();
    let pred: Vec<f64> = m
        .predict_batch(&ds.texts())
        .unwrap()
        .into_iter()
        .map(|p| p.clamp(1.0, 5.0))
        .collect();
    let gold = ds.gold_targets().unwrap();
    assert_eq!(
        rep.qwk,
        qwk(&pred, &gold, RoundingPolicy::NearestIntegerClamped).unwrap()
    );
    assert_eq!(rep.plcc, plcc(&pred, &gold).ok());
    assert_eq!(rep.srcc, srcc(&pred, &gold).ok());
    assert_eq!(rep.rmse, rmse(&pred, &gold).unwrap());
}
