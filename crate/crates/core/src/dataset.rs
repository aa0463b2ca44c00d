//! Text responses, expert ratings and pseudo-labels.
//!
//! A [`Dataset`] is positional: record `i` is sample index `i` everywhere
//! else in the crate (weight vectors, loss vectors, clean sets).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::text;

pub const MIN_SCORE: f64 = 1.0;
pub const MAX_SCORE: f64 = 5.0;

pub fn in_score_range(x: f64) -> bool {
    (MIN_SCORE..=MAX_SCORE).contains(&x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Spoken,
    Written,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Spoken => "spoken",
            Modality::Written => "written",
        }
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spoken" => Ok(Modality::Spoken),
            "written" => Ok(Modality::Written),
            other => Err(validation(format!("unknown modality {other:?}"))),
        }
    }
}

/// One text response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub candidate_id: String,
    pub text: String,
    pub modality: Modality,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        candidate_id: impl Into<String>,
        text: impl Into<String>,
        modality: Modality,
    ) -> Result<Self> {
        let sample = Sample {
            id: id.into(),
            candidate_id: candidate_id.into(),
            text: text.into(),
            modality,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(validation("sample id is empty"));
        }
        if text::word_count(&self.text) == 0 {
            return Err(validation(format!("sample {} has no words", self.id)));
        }
        Ok(())
    }
}

/// Expert ratings and their mean. The mean is always derived, never stored
/// independently.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratings {
    values: Vec<f64>,
    gold: f64,
}

impl Ratings {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(validation("ratings list is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !in_score_range(**v)) {
            return Err(validation(format!("rating {bad} outside [1, 5]")));
        }
        let gold = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Ratings { values, gold })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gold(&self) -> f64 {
        self.gold
    }
}

/// Where a pseudo-label came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub prompt_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoScore {
    pub score: f64,
    pub provenance: Option<Provenance>,
}

/// A sample with optional expert ratings and an optional pseudo-label.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub sample: Sample,
    pub ratings: Option<Ratings>,
    pub pseudo: Option<PseudoScore>,
}

impl Record {
    pub fn unrated(sample: Sample) -> Self {
        Record {
            sample,
            ratings: None,
            pseudo: None,
        }
    }

    pub fn rated(sample: Sample, ratings: Vec<f64>) -> Result<Self> {
        Ok(Record {
            sample,
            ratings: Some(Ratings::new(ratings)?),
            pseudo: None,
        })
    }

    pub fn gold_score(&self) -> Option<f64> {
        self.ratings.as_ref().map(Ratings::gold)
    }

    pub fn pseudo_score(&self) -> Option<f64> {
        self.pseudo.as_ref().map(|p| p.score)
    }

    pub fn with_pseudo(mut self, score: f64, provenance: Option<Provenance>) -> Result<Self> {
        if !in_score_range(score) {
            return Err(Error::OutOfRange(score));
        }
        self.pseudo = Some(PseudoScore { score, provenance });
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub split: Split,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids and empty texts.
    pub fn new(records: Vec<Record>, split: Split) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for r in &records {
            r.sample.validate()?;
            if !ids.insert(r.sample.id.as_str()) {
                return Err(Error::DuplicateId(r.sample.id.clone()));
            }
        }
        Ok(Dataset { records, split })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.sample.text.as_str()).collect()
    }

    /// Pseudo-labels in index order; errors on the first unlabeled sample.
    pub fn pseudo_targets(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.pseudo_score()
                    .ok_or_else(|| validation(format!("sample {} has no pseudo_score", r.sample.id)))
            })
            .collect()
    }

    /// Gold scores in index order; errors on the first unrated sample.
    pub fn gold_targets(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.gold_score()
                    .ok_or_else(|| validation(format!("sample {} has no ratings", r.sample.id)))
            })
            .collect()
    }

    pub fn candidate_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.sample.candidate_id.as_str()).collect()
    }
}

/// Candidate ids present in both splits.
pub fn check_split_integrity(train: &Dataset, test: &Dataset) -> BTreeSet<String> {
    let test_ids = test.candidate_ids();
    train
        .candidate_ids()
        .into_iter()
        .filter(|c| test_ids.contains(c))
        .map(String::from)
        .collect()
}

/// Histogram of scores (gold if rated, otherwise pseudo) with bins starting
/// at 1.0 and spaced `bin_width` apart. The last bin also collects 5.0.
/// Returns `(bin_start, count)` for every bin, empty ones included.
pub fn score_histogram(dataset: &Dataset, bin_width: f64) -> Result<Vec<(f64, usize)>> {
    let scores: Vec<f64> = dataset
        .records
        .iter()
        .map(|r| {
            r.gold_score()
                .or(r.pseudo_score())
                .ok_or_else(|| validation(format!("sample {} has no score", r.sample.id)))
        })
        .collect::<Result<_>>()?;
    histogram(&scores, bin_width)
}

pub fn histogram(scores: &[f64], bin_width: f64) -> Result<Vec<(f64, usize)>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(validation(format!("bin width {bin_width} must be positive")));
    }
    if scores.is_empty() {
        return Err(validation("no scores to bin"));
    }
    let span = MAX_SCORE - MIN_SCORE;
    let n_bins = libm::floor(span / bin_width + 1e-9) as usize + 1;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in scores {
        if !in_score_range(s) {
            return Err(Error::OutOfRange(s));
        }
        let k = (libm::floor((s - MIN_SCORE) / bin_width + 1e-9) as usize).min(n_bins - 1);
        *counts.entry(k).or_default() += 1;
    }
    Ok((0..n_bins)
        .map(|k| (MIN_SCORE + k as f64 * bin_width, counts.get(&k).copied().unwrap_or(0)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample(id: &str, cand: &str) -> Sample {
        Sample::new(id, cand, "I goes home", Modality::Spoken).unwrap()
    }

    fn ds(ids: &[(&str, &str)]) -> Dataset {
        let recs = ids.iter().map(|(i, c)| Record::unrated(sample(i, c))).collect();
        Dataset::new(recs, Split::Train).unwrap()
    }

    #[test]
    fn gold_is_mean_of_ratings() {
        let r = Record::rated(sample("s1", "c1"), vec![4.0, 5.0]).unwrap();
        assert_eq!(r.gold_score(), Some(4.5));
    }

    #[test]
    fn rating_validation() {
        assert!(Ratings::new(vec![]).is_err());
        assert!(Ratings::new(vec![0.5]).is_err());
        assert!(Ratings::new(vec![5.5]).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let recs = vec![Record::unrated(sample("s1", "a")), Record::unrated(sample("s1", "b"))];
        assert_eq!(
            Dataset::new(recs, Split::Train).unwrap_err(),
            Error::DuplicateId("s1".into())
        );
    }

    #[test]
    fn empty_text_rejected() {
        assert!(Sample::new("x", "c", "   ", Modality::Written).is_err());
    }

    #[test]
    fn split_overlap() {
        let a = ds(&[("1", "c1"), ("2", "c2")]);
        let b = ds(&[("3", "c3")]);
        assert!(check_split_integrity(&a, &b).is_empty());
        let c = ds(&[("4", "c7"), ("5", "c3")]);
        let d = ds(&[("6", "c7")]);
        assert_eq!(check_split_integrity(&c, &d), BTreeSet::from(["c7".into()]));
        let empty = ds(&[]);
        assert!(check_split_integrity(&empty, &d).is_empty());
        assert_eq!(
            check_split_integrity(&c, &c),
            BTreeSet::from(["c7".into(), "c3".into()])
        );
    }

    #[test]
    fn histogram_unit_bins() {
        let h = histogram(&[1.0, 1.0, 5.0], 1.0).unwrap();
        assert_eq!(h, vec![(1.0, 2), (2.0, 0), (3.0, 0), (4.0, 0), (5.0, 1)]);
        assert!(histogram(&[], 1.0).is_err());
        assert!(histogram(&[1.0], 0.0).is_err());
    }

    #[test]
    fn histogram_needs_scores() {
        assert!(score_histogram(&ds(&[("1", "c")]), 1.0).is_err());
    }

    #[test]
    fn pseudo_label_range_enforced() {
        let r = Record::unrated(sample("s", "c"));
        assert!(r.clone().with_pseudo(6.0, None).is_err());
        assert_eq!(r.with_pseudo(3.5, None).unwrap().pseudo_score(), Some(3.5));
    }
}
