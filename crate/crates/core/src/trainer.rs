//! Small-loss sample reweighting.
//!
//! Every epoch trains on all samples in weighted mini-batches, then scores
//! each sample with the frozen model, keeps the `floor(alpha * N)` samples
//! with the smallest loss and spreads the unit weight mass uniformly over
//! them for the next epoch. Samples outside the clean set get weight zero
//! but keep being scored, so they come back as soon as their loss drops.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{validation, Error, Result};
use crate::model::{Example, RegressionModel};

/// Learning rate per sample used to derive the default rate for `N` samples.
///
/// Stored weights sum to one, so the batch loss is about `1/N` of a plain
/// MSE; multiplying the step size by `N` puts the update back on the MSE
/// scale.
pub const BASE_LEARNING_RATE: f64 = 0.2;

pub fn recommended_learning_rate(n: usize) -> f64 {
    BASE_LEARNING_RATE * n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Fraction of samples kept as clean after each epoch, in [0, 1].
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Step size applied to the weighted batch loss as stored.
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

/// The default learning rate assumes 1000 samples; see [`TrainConfig::for_samples`].
impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.3,
            epochs: 10,
            batch_size: 32,
            learning_rate: recommended_learning_rate(1000),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// Defaults with the learning rate scaled for `n` samples.
    pub fn for_samples(n: usize) -> Self {
        TrainConfig {
            learning_rate: recommended_learning_rate(n),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(validation(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.epochs == 0 {
            return Err(validation("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(validation("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(validation(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-sample weights for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    pub epoch: usize,
    pub weights: Vec<f64>,
    /// All weights are zero because the clean set was empty.
    pub degenerate: bool,
}

impl SampleWeights {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn support(&self) -> BTreeSet<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanSet {
    pub epoch: usize,
    /// The `floor(alpha * N)` lowest-loss indices, in ascending loss order.
    pub indices: Vec<usize>,
    /// Full stable argsort of the losses.
    pub permutation: Vec<usize>,
}

impl CleanSet {
    pub fn is_degenerate(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn init_weights(n: usize) -> Result<SampleWeights> {
    if n == 0 {
        return Err(validation("cannot initialize weights for an empty dataset"));
    }
    Ok(SampleWeights {
        epoch: 0,
        weights: alloc::vec![1.0 / n as f64; n],
        degenerate: false,
    })
}

/// `floor(alpha * n)`, tolerant of `alpha` values like 0.3 that are not
/// exactly representable.
pub fn clean_set_size(alpha: f64, n: usize) -> usize {
    let k = libm::floor(alpha * n as f64 + 1e-9);
    (k.max(0.0) as usize).min(n)
}

/// Squared error of every sample under the current (frozen) model.
pub fn per_sample_losses<M: RegressionModel + ?Sized>(
    model: &M,
    dataset: &Dataset,
    epoch: usize,
) -> Result<LossRecord> {
    let targets = dataset.pseudo_targets()?;
    losses_for(model, &dataset.texts(), &targets, epoch)
}

pub fn losses_for<M: RegressionModel + ?Sized>(
    model: &M,
    texts: &[&str],
    targets: &[f64],
    epoch: usize,
) -> Result<LossRecord> {
    if texts.len() != targets.len() {
        return Err(validation("texts and targets differ in length"));
    }
    let preds = model.predict_batch(texts)?;
    let losses: Vec<f64> = preds.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).collect();
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    Ok(LossRecord { epoch, losses })
}

/// Stable ascending argsort by `(loss, index)`.
pub fn argsort(losses: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    idx.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    idx
}

pub fn select_clean(losses: &LossRecord, alpha: f64) -> Result<CleanSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(validation(format!("alpha {alpha} outside [0, 1]")));
    }
    let permutation = argsort(&losses.losses);
    let k = clean_set_size(alpha, losses.losses.len());
    Ok(CleanSet {
        epoch: losses.epoch,
        indices: permutation[..k].to_vec(),
        permutation,
    })
}

/// Weights for the epoch after `clean`: `1/|clean|` on clean indices, zero
/// elsewhere. An empty clean set gives all-zero weights flagged degenerate.
pub fn update_weights(clean: &CleanSet, n: usize) -> Result<SampleWeights> {
    let mut weights = alloc::vec![0.0; n];
    let unique: BTreeSet<usize> = clean.indices.iter().copied().collect();
    if let Some(&bad) = unique.iter().find(|&&i| i >= n) {
        return Err(validation(format!("clean index {bad} out of range for {n} samples")));
    }
    let degenerate = unique.is_empty();
    if !degenerate {
        let w = 1.0 / unique.len() as f64;
        for i in unique {
            weights[i] = w;
        }
    }
    Ok(SampleWeights {
        epoch: clean.epoch + 1,
        weights,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the weighted batch losses seen during the epoch.
    pub mean_weighted_loss: f64,
    pub clean_set_size: usize,
    /// Fraction of samples whose membership in the weight support changed.
    pub churn_fraction: f64,
    pub degenerate: bool,
    pub warning: Option<String>,
    /// Per-sample losses at the end of the epoch.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Weights that would be used for the next epoch.
    pub final_weights: Option<SampleWeights>,
}

impl TrainHistory {
    pub fn any_degenerate(&self) -> bool {
        self.epochs.iter().any(|e| e.degenerate)
    }
}

/// Trains `model` on the pseudo-labels of `dataset`.
pub fn train<M: RegressionModel + ?Sized>(
    model: &mut M,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    let targets = dataset.pseudo_targets()?;
    train_on(model, &dataset.texts(), &targets, config, |_, _, _| {})
}

/// Training loop over explicit texts and targets. `on_epoch` sees each
/// epoch's record, the model after the epoch and the weights chosen for
/// the next epoch.
pub fn train_on<M, F>(
    model: &mut M,
    texts: &[&str],
    targets: &[f64],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainHistory>
where
    M: RegressionModel + ?Sized,
    F: FnMut(&EpochRecord, &M, &SampleWeights),
{
    config.validate()?;
    if texts.len() != targets.len() {
        return Err(validation("texts and targets differ in length"));
    }
    let n = texts.len();
    let mut weights = init_weights(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .map(|&i| Example {
                    text: texts[i],
                    target: targets[i],
                    weight: weights.weights[i],
                })
                .collect();
            let loss = model.train_step(&batch, config.learning_rate).map_err(|e| match e {
                Error::NonFiniteLoss => Error::Divergence {
                    epoch,
                    batch: b,
                    indices: chunk.to_vec(),
                },
                other => other,
            })?;
            loss_sum += loss;
            batches += 1;
        }

        let record = losses_for(&*model, texts, targets, epoch).map_err(|e| match e {
            Error::NonFiniteLoss => Error::Divergence {
                epoch,
                batch: batches,
                indices: Vec::new(),
            },
            other => other,
        })?;
        let clean = select_clean(&record, config.alpha)?;
        let (next, warning) = if clean.is_degenerate() {
            let mut kept = weights.clone();
            kept.epoch = epoch + 1;
            let msg = format!(
                "epoch {epoch}: clean set is empty (alpha {} x {n} samples); keeping previous weights",
                config.alpha
            );
            (kept, Some(msg))
        } else {
            (update_weights(&clean, n)?, None)
        };
        let before = weights.support();
        let after = next.support();
        let churn = before.symmetric_difference(&after).count() as f64 / n as f64;

        let rec = EpochRecord {
            epoch,
            mean_weighted_loss: loss_sum / batches.max(1) as f64,
            clean_set_size: clean.indices.len(),
            churn_fraction: churn,
            degenerate: warning.is_some(),
            warning,
            losses: record.losses,
        };
        on_epoch(&rec, model, &next);
        history.epochs.push(rec);
        weights = next;
    }
    history.final_weights = Some(weights);
    Ok(history)
}
