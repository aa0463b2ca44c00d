//! Regression model contract and the featurizer backend.
//!
//! The featurizer backend is a linear model over hand-built text features
//! (length statistics plus error-marker densities) trained with plain
//! gradient descent. It is small enough that its gradients can be checked
//! against finite differences and that whole training runs are bitwise
//! reproducible.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::inject::ErrorType;
use crate::lexicon::Lexicon;
use crate::markers;
use crate::text;

/// One training example with its current sample weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example<'a> {
    pub text: &'a str,
    pub target: f64,
    pub weight: f64,
}

/// A text-to-score regressor.
///
/// `predict` must be deterministic between calls to `train_step`, and
/// `predict_batch(texts)[k]` must equal `predict(texts[k])`. Predictions are
/// not clamped to the rubric range.
pub trait RegressionModel {
    type Params: Clone;

    fn predict(&self, text: &str) -> Result<f64>;

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<f64>> {
        texts.iter().map(|t| self.predict(t)).collect()
    }

    /// One gradient step on `(1/|B|) * sum_i w_i * (predict(x_i) - y_i)^2`.
    /// Returns that loss evaluated before the update.
    fn train_step(&mut self, batch: &[Example<'_>], learning_rate: f64) -> Result<f64>;

    fn snapshot(&self) -> Self::Params;

    fn restore(&mut self, params: Self::Params);
}

/// Checks the preconditions every `train_step` shares.
pub fn validate_batch(batch: &[Example<'_>], learning_rate: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(validation("empty batch"));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(validation(format!("learning rate {learning_rate} must be positive")));
    }
    for ex in batch {
        if !(ex.weight >= 0.0 && ex.weight.is_finite()) {
            return Err(validation(format!(
                "sample weight {} must be finite and >= 0",
                ex.weight
            )));
        }
    }
    Ok(())
}

/// Feature names in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "word_count",
    "mean_word_length",
    "type_token_ratio",
    "filler_word_density",
    "redundant_phrase_density",
    "word_order_density",
    "verb_form_density",
    "preposition_density",
    "tense_density",
    "subject_verb_agreement_density",
    "spelling_density",
    "punctuation_density",
    "pronoun_density",
];

pub const FEATURE_COUNT: usize = 3 + ErrorType::COUNT;

/// Scale applied to marker densities so typical values are O(1).
pub const DENSITY_SCALE: f64 = 10.0;

// Fixed offsets keep the length features roughly centered so they are not
// nearly collinear with the bias.
const WORD_COUNT_CENTER: f64 = 50.0;
const WORD_LENGTH_CENTER: f64 = 4.5;
const TYPE_TOKEN_CENTER: f64 = 0.7;

/// Extracts the feature vector of a text. Pure function of `text`.
pub fn extract_features(lex: &Lexicon, text: &str) -> Result<[f64; FEATURE_COUNT]> {
    let tokens = text::tokenize(text);
    if tokens.is_empty() {
        return Err(validation("cannot score empty text"));
    }
    let n = tokens.len() as f64;
    let mut letters = 0usize;
    let mut types = alloc::collections::BTreeSet::new();
    for t in &tokens {
        let norm = text::normalize(t.text);
        letters += norm.chars().count();
        types.insert(norm);
    }
    let marks = markers::detect(lex, text);
    let mut f = [0.0; FEATURE_COUNT];
    f[0] = (n - WORD_COUNT_CENTER) / 100.0;
    f[1] = (letters as f64 / n - WORD_LENGTH_CENTER) / 2.0;
    f[2] = types.len() as f64 / n - TYPE_TOKEN_CENTER;
    for (slot, d) in f[3..].iter_mut().zip(marks.densities()) {
        *slot = d * DENSITY_SCALE;
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    /// Step size per sample; the trainer default is this times `N`.
    pub learning_rate: f64,
    pub seed: u64,
    /// Initial weights are drawn uniformly from `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub init_bias: f64,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            learning_rate: crate::trainer::BASE_LEARNING_RATE,
            seed: 0,
            init_scale: 0.01,
            init_bias: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

type Features = [f64; FEATURE_COUNT];

#[derive(Debug, Clone)]
pub struct FeaturizerModel {
    config: FeaturizerConfig,
    params: LinearParams,
    lexicon: Lexicon,
    /// Features are a pure function of the text, so they are memoized.
    cache: RefCell<BTreeMap<String, Features>>,
}

impl FeaturizerModel {
    pub fn new(config: FeaturizerConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = (0..FEATURE_COUNT)
            .map(|_| {
                if config.init_scale > 0.0 {
                    rng.random_range(-config.init_scale..=config.init_scale)
                } else {
                    0.0
                }
            })
            .collect();
        FeaturizerModel {
            config,
            params: LinearParams {
                weights,
                bias: config.init_bias,
            },
            lexicon: Lexicon::new(),
            cache: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn from_params(config: FeaturizerConfig, params: LinearParams) -> Result<Self> {
        if params.weights.len() != FEATURE_COUNT {
            return Err(validation(format!(
                "expected {FEATURE_COUNT} weights, got {}",
                params.weights.len()
            )));
        }
        Ok(FeaturizerModel {
            config,
            params,
            lexicon: Lexicon::new(),
            cache: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &FeaturizerConfig {
        &self.config
    }

    pub fn params(&self) -> &LinearParams {
        &self.params
    }

    pub fn features(&self, text: &str) -> Result<Features> {
        if let Some(f) = self.cache.borrow().get(text) {
            return Ok(*f);
        }
        let f = extract_features(&self.lexicon, text)?;
        self.cache.borrow_mut().insert(String::from(text), f);
        Ok(f)
    }

    pub fn clear_feature_cache(&self) {
        self.cache.borrow_mut().clear();
    }

    fn linear(&self, f: &Features) -> f64 {
        f.iter()
            .zip(&self.params.weights)
            .fold(self.params.bias, |acc, (x, w)| acc + x * w)
    }

    /// Weighted batch loss and its gradient, `[d/dw_0, .., d/dw_k, d/dbias]`.
    pub fn loss_and_gradient(&self, batch: &[Example<'_>]) -> Result<(f64, Vec<f64>)> {
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = alloc::vec![0.0; FEATURE_COUNT + 1];
        for ex in batch {
            let f = self.features(ex.text)?;
            let residual = self.linear(&f) - ex.target;
            loss += ex.weight * residual * residual;
            let g = 2.0 * scale * ex.weight * residual;
            for (gi, xi) in grad.iter_mut().zip(f.iter()) {
                *gi += g * xi;
            }
            grad[FEATURE_COUNT] += g;
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok((loss, grad))
    }

    /// Batch loss at the current parameters, without a gradient.
    pub fn batch_loss(&self, batch: &[Example<'_>]) -> Result<f64> {
        let mut loss = 0.0;
        for ex in batch {
            let r = self.predict(ex.text)? - ex.target;
            loss += ex.weight * r * r;
        }
        Ok(loss / batch.len() as f64)
    }

    /// Flat parameter vector in gradient order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.params.weights.clone();
        v.push(self.params.bias);
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), FEATURE_COUNT + 1);
        self.params.weights.copy_from_slice(&flat[..FEATURE_COUNT]);
        self.params.bias = flat[FEATURE_COUNT];
    }
}

impl RegressionModel for FeaturizerModel {
    type Params = LinearParams;

    fn predict(&self, text: &str) -> Result<f64> {
        let f = self.features(text)?;
        Ok(self.linear(&f))
    }

    fn train_step(&mut self, batch: &[Example<'_>], learning_rate: f64) -> Result<f64> {
        validate_batch(batch, learning_rate)?;
        let (loss, grad) = self.loss_and_gradient(batch)?;
        for (w, g) in self.params.weights.iter_mut().zip(&grad) {
            *w -= learning_rate * g;
        }
        self.params.bias -= learning_rate * grad[FEATURE_COUNT];
        Ok(loss)
    }

    fn snapshot(&self) -> LinearParams {
        self.params.clone()
    }

    fn restore(&mut self, params: LinearParams) {
        self.params = params;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn zero_model(bias: f64) -> FeaturizerModel {
        FeaturizerModel::from_params(
            FeaturizerConfig::default(),
            LinearParams {
                weights: vec![0.0; FEATURE_COUNT],
                bias,
            },
        )
        .unwrap()
    }

    #[test]
    fn bias_only_model_predicts_bias() {
        let m = zero_model(3.0);
        assert_eq!(m.predict("anything at all").unwrap(), 3.0);
        assert!(m.predict("   ").is_err());
    }

    #[test]
    fn single_sample_loss() {
        let mut m = zero_model(2.0);
        let batch = [Example {
            text: "she walks",
            target: 4.0,
            weight: 1.0,
        }];
        assert_eq!(m.train_step(&batch, 0.1).unwrap(), 4.0);
        assert!(m.predict("she walks").unwrap() > 2.0);
    }

    #[test]
    fn zero_weights_leave_parameters_unchanged() {
        let mut m = FeaturizerModel::new(FeaturizerConfig::default());
        let before = m.snapshot();
        let batch = [
            Example {
                text: "a b c",
                target: 1.0,
                weight: 0.0,
            },
            Example {
                text: "she walks to the park.",
                target: 5.0,
                weight: 0.0,
            },
        ];
        assert_eq!(m.train_step(&batch, 0.5).unwrap(), 0.0);
        assert_eq!(m.snapshot(), before);
    }

    #[test]
    fn batch_validation() {
        let mut m = zero_model(0.0);
        assert!(m.train_step(&[], 0.1).is_err());
        let neg = [Example {
            text: "x",
            target: 1.0,
            weight: -1.0,
        }];
        assert!(m.train_step(&neg, 0.1).is_err());
    }

    #[test]
    fn non_finite_target_is_divergence() {
        let mut m = zero_model(0.0);
        let b = [Example {
            text: "x",
            target: f64::INFINITY,
            weight: 1.0,
        }];
        assert_eq!(m.train_step(&b, 0.1), Err(Error::NonFiniteLoss));
    }

    #[test]
    fn features_are_pure() {
        let m = FeaturizerModel::new(FeaturizerConfig::default());
        let t = "Every day, she um walks to the prak.";
        assert_eq!(m.features(t).unwrap(), m.features(t).unwrap());
        let f = m.features(t).unwrap();
        assert!(f[3] > 0.0, "filler density");
        assert!(f[10] > 0.0, "spelling density");
    }
}
