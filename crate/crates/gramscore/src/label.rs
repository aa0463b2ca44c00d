//! Concurrent, cached pseudo-labeling of a dataset.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{Context, Result};

use gramscore_core::dataset::{Dataset, Provenance};
use gramscore_core::prompt::{label_sample, LlmClient, PseudoLabel, Rejection, RubricPrompt};

use crate::cache::PseudoLabelCache;

pub const DEFAULT_RETRIES: usize = 3;

/// Counts `complete` calls on the wrapped client.
pub struct Counting<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C> Counting<C> {
    pub fn new(inner: C) -> Self {
        Counting {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<C: LlmClient> LlmClient for Counting<C> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn complete(&self, prompt: &str) -> gramscore_core::Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(prompt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    /// Input dataset with `pseudo_score` set on every labeled sample.
    pub dataset: Dataset,
    pub labels: Vec<PseudoLabel>,
    pub rejections: Vec<Rejection>,
    pub cache_hits: usize,
    pub client_calls: usize,
}

impl LabelOutcome {
    pub fn rejection_rate(&self) -> f64 {
        let n = self.dataset.len();
        if n == 0 {
            0.0
        } else {
            self.rejections.len() as f64 / n as f64
        }
    }
}

/// Labels every sample, consulting `cache` first. At most `concurrency`
/// client requests are in flight at a time. Rejected samples keep no
/// pseudo-score; records and rejections stay in dataset order.
pub fn pseudo_label_dataset<C: LlmClient + Sync>(
    dataset: &Dataset,
    client: &C,
    rubric: &RubricPrompt,
    retries: usize,
    cache: &PseudoLabelCache,
    concurrency: usize,
) -> Result<LabelOutcome> {
    let client = Counting::new(client);
    let model = client.model_name().to_owned();
    let n = dataset.len();
    let next = AtomicUsize::new(0);
    let hits = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PseudoLabel, Rejection>>>> = Mutex::new(vec![None; n]);
    let failure: Mutex<Option<anyhow::Error>> = Mutex::new(None);

    thread::scope(|s| {
        for _ in 0..concurrency.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n || failure.lock().unwrap().is_some() {
                    break;
                }
                let sample = &dataset.records[i].sample;
                let outcome = match cache.get(&sample.id, &rubric.prompt_hash, &model) {
                    Some(hit) => {
                        hits.fetch_add(1, Ordering::Relaxed);
                        Ok(hit)
                    }
                    None => {
                        let r = label_sample(&client, rubric, sample, retries);
                        if let Ok(label) = &r {
                            if let Err(e) = cache.insert(label.clone()) {
                                *failure.lock().unwrap() = Some(e);
                                break;
                            }
                        }
                        r
                    }
                };
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }

    let mut out = dataset.clone();
    let mut labels = Vec::new();
    let mut rejections = Vec::new();
    for (rec, r) in out.records.iter_mut().zip(results.into_inner().unwrap()) {
        match r.expect("every index is visited") {
            Ok(label) => {
                let prov = Provenance {
                    model: label.model_name.clone(),
                    prompt_hash: label.prompt_hash.clone(),
                };
                *rec = rec.clone().with_pseudo(label.score, Some(prov))?;
                labels.push(label);
            }
            Err(rej) => {
                rec.pseudo = None;
                rejections.push(rej);
            }
        }
    }
    Ok(LabelOutcome {
        dataset: out,
        labels,
        rejections,
        cache_hits: hits.into_inner(),
        client_calls: client.calls(),
    })
}

pub fn write_rejections(path: &Path, rejections: &[Rejection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["sample_id", "reason", "attempts"])?;
    for r in rejections {
        w.write_record([r.sample_id.as_str(), r.reason.as_str(), &r.attempts.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gramscore_core::dataset::{Modality, Record, Sample, Split};

    struct Fixed(&'static str);

    impl LlmClient for Fixed {
        fn model_name(&self) -> &str {
            "fixed"
        }
        fn complete(&self, prompt: &str) -> gramscore_core::Result<String> {
            if prompt.contains("garbage") {
                Ok("no idea".into())
            } else {
                Ok(self.0.into())
            }
        }
    }

    fn dataset(texts: &[&str]) -> Dataset {
        let records = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Record::unrated(Sample::new(format!("s{i}"), format!("c{i}"), *t, Modality::Spoken).unwrap()))
            .collect();
        Dataset::new(records, Split::Train).unwrap()
    }

    #[test]
    fn constant_client_labels_everything() {
        let ds = dataset(&["one", "two", "three", "four", "five"]);
        let cache = PseudoLabelCache::in_memory();
        let out = pseudo_label_dataset(&ds, &Fixed("4"), &RubricPrompt::default(), 3, &cache, 3).unwrap();
        assert!(out.dataset.records.iter().all(|r| r.pseudo_score() == Some(4.0)));
        assert_eq!(out.client_calls, 5);
    }

    #[test]
    fn garbage_sample_is_rejected_alone() {
        let ds = dataset(&["fine", "garbage here", "fine too"]);
        let cache = PseudoLabelCache::in_memory();
        let out = pseudo_label_dataset(&ds, &Fixed("Score: 3"), &RubricPrompt::default(), 3, &cache, 2).unwrap();
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].sample_id, "s1");
        assert_eq!(out.rejections[0].attempts, 3);
        assert_eq!(out.dataset.records[1].pseudo_score(), None);
        assert_eq!(out.client_calls, 5);
    }

    #[test]
    fn second_run_hits_cache_only() {
        let ds = dataset(&["a b", "c d", "e f"]);
        let cache = PseudoLabelCache::in_memory();
        let rubric = RubricPrompt::default();
        let first = pseudo_label_dataset(&ds, &Fixed("2"), &rubric, 3, &cache, 4).unwrap();
        let second = pseudo_label_dataset(&ds, &Fixed("5"), &rubric, 3, &cache, 4).unwrap();
        assert_eq!(second.client_calls, 0);
        assert_eq!(second.cache_hits, 3);
        assert_eq!(first.dataset, second.dataset);
    }
}
