//! Agreement metrics between predicted and reference scores.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MAX_SCORE, MIN_SCORE};
use crate::error::{validation, Error, Result};
use crate::model::RegressionModel;

/// Number of integer rubric levels (1..=5).
pub const LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingPolicy {
    /// Round half away from zero, then clamp to [1, 5].
    #[default]
    NearestIntegerClamped,
    /// Inputs must already be integer levels in [1, 5].
    None,
}

impl RoundingPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            RoundingPolicy::NearestIntegerClamped => "nearest_integer_clamped",
            RoundingPolicy::None => "none",
        }
    }

    /// Maps a score to a zero-based level index.
    pub fn level(self, x: f64) -> Result<usize> {
        match self {
            RoundingPolicy::NearestIntegerClamped => {
                if x.is_nan() {
                    return Err(validation("cannot round NaN to a level"));
                }
                let r = libm::round(x).clamp(MIN_SCORE, MAX_SCORE);
                Ok((r - MIN_SCORE) as usize)
            }
            RoundingPolicy::None => {
                if libm::trunc(x) != x || !(MIN_SCORE..=MAX_SCORE).contains(&x) {
                    return Err(validation(format!("{x} is not an integer level in [1, 5]")));
                }
                Ok((x - MIN_SCORE) as usize)
            }
        }
    }
}

impl fmt::Display for RoundingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoundingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest_integer_clamped" => Ok(RoundingPolicy::NearestIntegerClamped),
            "none" => Ok(RoundingPolicy::None),
            other => Err(validation(format!("unknown rounding policy {other:?}"))),
        }
    }
}

fn check_lengths(pred: &[f64], gold: &[f64], min: usize) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(validation(format!(
            "length mismatch: {} predictions, {} references",
            pred.len(),
            gold.len()
        )));
    }
    if pred.len() < min {
        return Err(validation(format!("need at least {min} pairs, got {}", pred.len())));
    }
    Ok(())
}

/// Quadratic weighted kappa over the five rubric levels.
pub fn qwk(pred: &[f64], gold: &[f64], policy: RoundingPolicy) -> Result<f64> {
    check_lengths(pred, gold, 1)?;
    let mut observed = [[0.0f64; LEVELS]; LEVELS];
    let mut row = [0.0f64; LEVELS];
    let mut col = [0.0f64; LEVELS];
    for (&p, &g) in pred.iter().zip(gold) {
        let i = policy.level(p)?;
        let j = policy.level(g)?;
        observed[i][j] += 1.0;
        row[i] += 1.0;
        col[j] += 1.0;
    }
    let n = pred.len() as f64;
    let denom = ((LEVELS - 1) * (LEVELS - 1)) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            let d = i as f64 - j as f64;
            let w = d * d / denom;
            num += w * observed[i][j];
            den += w * row[i] * col[j] / n;
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::UndefinedCorrelation("qwk"));
    }
    Ok(1.0 - num / den)
}

fn pearson(x: &[f64], y: &[f64], name: &'static str) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(name));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson linear correlation.
pub fn plcc(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths(pred, gold, 2)?;
    pearson(pred, gold, "plcc")
}

/// 1-based ranks, ties sharing the mean of their positions.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson over mid-ranks).
pub fn srcc(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths(pred, gold, 2)?;
    pearson(&mid_ranks(pred), &mid_ranks(gold), "srcc")
}

pub fn rmse(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_lengths(pred, gold, 1)?;
    let sse: f64 = pred.iter().zip(gold).map(|(p, g)| (p - g) * (p - g)).sum();
    Ok(libm::sqrt(sse / pred.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub qwk: f64,
    /// `None` when either side has zero variance.
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub rmse: f64,
    pub rounding_policy: RoundingPolicy,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Metrics over `(pred, gold)` with predictions clamped to [1, 5] first.
pub fn report(pred: &[f64], gold: &[f64], policy: RoundingPolicy) -> Result<AgreementReport> {
    check_lengths(pred, gold, 1)?;
    let clamped: Vec<f64> = pred.iter().map(|p| p.clamp(MIN_SCORE, MAX_SCORE)).collect();
    let (plcc_v, srcc_v) = if clamped.len() >= 2 {
        (defined(plcc(&clamped, gold))?, defined(srcc(&clamped, gold))?)
    } else {
        (None, None)
    };
    Ok(AgreementReport {
        n: clamped.len(),
        qwk: qwk(&clamped, gold, policy)?,
        plcc: plcc_v,
        srcc: srcc_v,
        rmse: rmse(&clamped, gold)?,
        rounding_policy: policy,
    })
}

/// Scores `testset` with `model` against its gold ratings.
pub fn evaluate<M: RegressionModel + ?Sized>(
    model: &M,
    testset: &Dataset,
    policy: RoundingPolicy,
) -> Result<AgreementReport> {
    if testset.is_empty() {
        return Err(validation("empty test set"));
    }
    let gold = testset.gold_targets()?;
    let pred = model.predict_batch(&testset.texts())?;
    report(&pred, &gold, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const P: RoundingPolicy = RoundingPolicy::NearestIntegerClamped;

    #[test]
    fn qwk_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(qwk(&x, &x, P).unwrap(), 1.0);
        assert_eq!(qwk(&[5.0, 1.0], &[1.0, 5.0], P).unwrap(), -1.0);
        assert_eq!(qwk(&[3.0, 3.0], &[3.0, 3.0], P).unwrap(), 1.0);
        assert!(qwk(&[1.0], &[1.0, 2.0], P).is_err());
        assert!(qwk(&[], &[], P).is_err());
    }

    #[test]
    fn rounding_is_half_away_from_zero_and_clamped() {
        assert_eq!(P.level(4.5).unwrap(), 4);
        assert_eq!(P.level(2.5).unwrap(), 2);
        assert_eq!(P.level(2.49).unwrap(), 1);
        assert_eq!(P.level(0.2).unwrap(), 0);
        assert_eq!(P.level(7.0).unwrap(), 4);
        assert!(RoundingPolicy::None.level(4.5).is_err());
        assert_eq!(RoundingPolicy::None.level(4.0).unwrap(), 3);
    }

    #[test]
    fn plcc_examples() {
        let g = [1.0, 2.0, 4.0, 5.0];
        let affine: Vec<f64> = g.iter().map(|x| 2.0 * x + 1.0).collect();
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        assert!((plcc(&g, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!((plcc(&affine, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!((plcc(&neg, &g).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(plcc(&[3.0, 3.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation("plcc")));
        assert!(plcc(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn srcc_examples() {
        let g = [1.0, 2.0, 3.0, 4.0];
        let cubed: Vec<f64> = g.iter().map(|x| x * x * x).collect();
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert!((srcc(&cubed, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!((srcc(&rev, &g).unwrap() + 1.0).abs() < 1e-12);
        // mid-ranks [1.5, 1.5, 3] against [1, 2, 3]: cov 1.5, var 1.5 and 2.
        let expected = 1.5 / libm::sqrt(1.5 * 2.0);
        assert!((srcc(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mid_rank_ties() {
        assert_eq!(mid_ranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0], &[5.0]).unwrap(), 2.0);
        assert_eq!(rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), libm::sqrt(2.5));
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn report_marks_constant_predictions_undefined() {
        let gold = [1.0, 3.0, 5.0];
        let r = report(&[3.0, 3.0, 3.0], &gold, P).unwrap();
        assert_eq!(r.plcc, None);
        assert_eq!(r.srcc, None);
        assert!((r.rmse - libm::sqrt(8.0 / 3.0)).abs() < 1e-12);
        assert_eq!(r.n, 3);
    }

    #[test]
    fn report_clamps_predictions() {
        let r = report(&[0.0, 6.0], &[1.0, 5.0], P).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.qwk, 1.0);
    }

    #[test]
    fn policy_names() {
        for p in [RoundingPolicy::NearestIntegerClamped, RoundingPolicy::None] {
            assert_eq!(p.as_str().parse::<RoundingPolicy>().unwrap(), p);
        }
    }
}
