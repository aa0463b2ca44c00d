use gramscore_core::dataset::{Dataset, Modality, Record, Sample, Split};
use gramscore_core::inject::*;
use gramscore_core::model::{Example, RegressionModel};
use gramscore_core::prompt::MockClient;
use gramscore_core::synth::{self, SynthConfig};
use gramscore_core::text;
use proptest::prelude::*;

fn sample_text(seed: u64) -> String {
    synth::generate(
        &SynthConfig {
            n_samples: 1,
            seed,
            max_error_types: 0,
            ..SynthConfig::default()
        },
        "i",
    )
    .unwrap()
    .remove(0)
    .text
}

fn error_type() -> impl Strategy<Value = ErrorType> {
    (0usize..ErrorType::COUNT).prop_map(|i| ErrorType::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_intensity_is_identity(ty in error_type(), seed in any::<u64>(), text_seed in 0u64..1000) {
        let text = sample_text(text_seed);
        let r = inject(&text, &ErrorSpec::new(ty, 0.0, seed).unwrap()).unwrap();
        prop_assert_eq!(&r.corrupted, &text);
        prop_assert!(r.edits.is_empty());
        prop_assert_eq!(r.achieved_intensity, 0.0);
    }

    #[test]
    fn injection_is_deterministic_and_replayable(
        ty in error_type(),
        intensity in 0.0f64..=1.0,
        seed in any::<u64>(),
        text_seed in 0u64..1000,
    ) {
        let text = sample_text(text_seed);
        let spec = ErrorSpec::new(ty, intensity, seed).unwrap();
        let a = inject(&text, &spec).unwrap();
        prop_assert_eq!(&a, &inject(&text, &spec).unwrap());
        prop_assert_eq!(apply_edits(&a.original, &a.edits).unwrap(), a.corrupted.clone());
    }

    #[test]
    fn word_accounting(
        ty in error_type(),
        intensity in 0.0f64..=1.0,
        seed in any::<u64>(),
        text_seed in 0u64..1000,
    ) {
        let text = sample_text(text_seed);
        let wc = text::tokenize(&text).len();
        let r = inject(&text, &ErrorSpec::new(ty, intensity, seed).unwrap()).unwrap();
        prop_assert!(r.achieved_intensity <= intensity + 1.0 / wc as f64 + 1e-12);
        prop_assert_eq!(r.achieved_intensity, r.affected_words as f64 / wc as f64);
        prop_assert_eq!(r.affected_words, r.edits.len());
        prop_assert_eq!(r.requested_words, (intensity * wc as f64).round() as usize);
        prop_assert_eq!(r.shortfall, r.affected_words < r.requested_words);
    }
}

#[test]
fn insertion_rules_hit_requested_intensity_exactly() {
    for seed in 0..20 {
        let text = synth::clean_text_with_words(seed, 100).unwrap();
        assert_eq!(text::tokenize(&text).len(), 100);
        for ty in ErrorType::ALL.into_iter().filter(|t| t.is_insertion()) {
            let r = inject(&text, &ErrorSpec::new(ty, 0.1, seed).unwrap()).unwrap();
            assert_eq!(r.edits.len(), 10, "{ty} seed {seed}");
            assert_eq!(r.achieved_intensity, 0.10);
            assert!(!r.shortfall);
        }
    }
}

#[test]
fn filler_edits_insert_lexicon_words() {
    let text = synth::clean_text_with_words(7, 100).unwrap();
    let r = inject(&text, &ErrorSpec::new(ErrorType::FillerWord, 0.1, 3).unwrap()).unwrap();
    for e in &r.edits {
        assert!(
            ["um", "uh", "like", "you know"].iter().any(|f| e.after.contains(f)),
            "{e:?}"
        );
    }
}

#[test]
fn verbless_fragment_reports_shortfall() {
    let r = inject("Blue sky.", &ErrorSpec::new(ErrorType::Tense, 0.5, 1).unwrap()).unwrap();
    assert!(r.shortfall);
    assert_eq!(r.achieved_intensity, 0.0);
    assert_eq!(r.corrupted, "Blue sky.");
}

#[test]
fn out_of_range_intensity_is_rejected() {
    assert!(ErrorSpec::new(ErrorType::Spelling, 1.5, 0).is_err());
    assert!(inject("", &ErrorSpec::new(ErrorType::Spelling, 0.1, 0).unwrap()).is_err());
}

fn rated_dataset(golds: &[f64]) -> Dataset {
    let records = golds
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let s = Sample::new(
                format!("s{i}"),
                format!("c{i}"),
                sample_text(i as u64),
                Modality::Written,
            )
            .unwrap();
            Record::rated(s, vec![g]).unwrap()
        })
        .collect();
    Dataset::new(records, Split::Test).unwrap()
}

#[test]
fn suite_filters_by_threshold_and_has_expected_cardinality() {
    let ds = rated_dataset(&[4.6, 3.0]);
    let suite = build_synthetic_suite(&ds, 4.5, &[0.0], &ErrorType::ALL, 1).unwrap();
    assert!(suite.iter().all(|r| r.sample_id == "s0" && r.corrupted == r.original));

    let ds = rated_dataset(&[5.0, 4.5, 2.0]);
    let suite = build_synthetic_suite(&ds, 4.5, &[0.0, 0.1, 0.2, 0.3], &ErrorType::ALL, 1).unwrap();
    assert_eq!(suite.len(), 80);

    let low = rated_dataset(&[2.0]);
    assert!(build_synthetic_suite(&low, 4.5, &[0.1], &ErrorType::ALL, 1).is_err());
}

struct Constant;

impl RegressionModel for Constant {
    type Params = ();
    fn predict(&self, _: &str) -> gramscore_core::Result<f64> {
        Ok(3.0)
    }
    fn train_step(&mut self, _: &[Example<'_>], _: f64) -> gramscore_core::Result<f64> {
        Ok(0.0)
    }
    fn snapshot(&self) {}
    fn restore(&mut self, _: ()) {}
}

struct RuleScorer(MockClient);

impl RegressionModel for RuleScorer {
    type Params = ();
    fn predict(&self, text: &str) -> gramscore_core::Result<f64> {
        Ok(self.0.rule_score(text))
    }
    fn train_step(&mut self, _: &[Example<'_>], _: f64) -> gramscore_core::Result<f64> {
        Ok(0.0)
    }
    fn snapshot(&self) {}
    fn restore(&mut self, _: ()) {}
}

#[test]
fn constant_model_is_never_impacted() {
    let ds = rated_dataset(&[5.0, 4.8]);
    let suite = build_synthetic_suite(&ds, 4.5, &[0.1, 0.3], &ErrorType::ALL, 2).unwrap();
    let rows = robustness_report(&Constant, &suite, 0.25).unwrap();
    assert_eq!(rows.len(), 30);
    assert!(rows
        .iter()
        .all(|r| r.mean_drop == 0.0 && r.pct_impacted == 0.0 && r.mean_pred == 3.0));
}

#[test]
fn report_has_baseline_rows() {
    let ds = rated_dataset(&[5.0; 3]);
    let suite = build_synthetic_suite(&ds, 4.5, &[0.05, 0.1, 0.2, 0.3], &ErrorType::ALL, 2).unwrap();
    let rows = robustness_report(&Constant, &suite, 0.25).unwrap();
    assert_eq!(rows.len(), 50);
    let flat = build_synthetic_suite(&ds, 4.5, &[0.0], &ErrorType::ALL, 2).unwrap();
    let rows = robustness_report(&Constant, &flat, 0.25).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows
        .iter()
        .all(|r| r.intensity == 0.0 && r.mean_drop == 0.0 && r.n == 3));
}

#[test]
fn rule_scorer_declines_with_filler_intensity() {
    let samples = synth::generate(
        &SynthConfig {
            n_samples: 50,
            seed: 13,
            max_error_types: 0,
            ..SynthConfig::default()
        },
        "r",
    )
    .unwrap();
    let ds = synth::rated(&samples, Split::Test).unwrap();
    let grid = [0.0, 0.05, 0.1, 0.2, 0.3];
    let suite = build_synthetic_suite(&ds, 4.5, &grid, &[ErrorType::FillerWord], 8).unwrap();
    let rows = robustness_report(&RuleScorer(MockClient::new(0, 0.0).unwrap()), &suite, 0.25).unwrap();
    assert_eq!(rows.len(), grid.len());
    assert_eq!(rows[0].mean_pred, 5.0);
    for w in rows.windows(2) {
        assert!(w[1].mean_pred <= w[0].mean_pred, "{rows:?}");
        assert!(w[1].pct_impacted >= w[0].pct_impacted);
    }
}
