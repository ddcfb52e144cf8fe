//! Noisy column matching and noisy definite defectives.

use alloc::vec;
use alloc::vec::Vec;

use crate::metrics::Confusion;
use crate::pooling::PoolingMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineConfig {
    /// Fraction of an item's pools that must be positive.
    pub coma_threshold: f64,
    /// Negative pools an item may appear in and still be a candidate.
    pub dd_negative_slack: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            coma_threshold: 1.0,
            dd_negative_slack: 0,
        }
    }
}

/// Fraction of positive pools per item (0 for an item in no pool).
pub fn coma_scores(a: &PoolingMatrix, y: &[u8]) -> Vec<f64> {
    assert_eq!(y.len(), a.m(), "outcome length does not match matrix rows");
    (0..a.n())
        .map(|i| {
            let col = a.col(i);
            if col.is_empty() {
                return 0.0;
            }
            col.iter().filter(|&&j| y[j as usize] != 0).count() as f64 / col.len() as f64
        })
        .collect()
}

/// Item `i` is positive iff its fraction of positive pools is at least
/// `coma_threshold`.
///
/// # Panics
/// If `y` does not have one entry per row of `a`.
pub fn noisy_coma(a: &PoolingMatrix, y: &[u8], config: &BaselineConfig) -> Vec<bool> {
    coma_scores(a, y)
        .into_iter()
        .map(|f| f >= config.coma_threshold)
        .collect()
}

/// Items in more than `dd_negative_slack` negative pools are cleared; any
/// remaining item that is the only candidate in some positive pool is
/// declared positive.
///
/// # Panics
/// If `y` does not have one entry per row of `a`.
pub fn noisy_dd(a: &PoolingMatrix, y: &[u8], config: &BaselineConfig) -> Vec<bool> {
    assert_eq!(y.len(), a.m(), "outcome length does not match matrix rows");
    let candidate: Vec<bool> = (0..a.n())
        .map(|i| a.col(i).iter().filter(|&&j| y[j as usize] == 0).count() <= config.dd_negative_slack)
        .collect();
    let mut positive = vec![false; a.n()];
    for j in (0..a.m()).filter(|&j| y[j] != 0) {
        let mut only = None;
        let mut count = 0;
        for &i in a.row(j) {
            if candidate[i as usize] {
                count += 1;
                only = Some(i as usize);
            }
        }
        if count == 1 {
            positive[only.unwrap()] = true;
        }
    }
    positive
}

/// One labelled instance for tuning.
#[derive(Debug, Clone, Copy)]
pub struct TuningCase<'a> {
    pub a: &'a PoolingMatrix,
    pub y: &'a [u8],
    pub truth: &'a [u8],
}

fn mean_total_error<F: Fn(&TuningCase) -> Vec<bool>>(cases: &[TuningCase], decode: F) -> f64 {
    cases
        .iter()
        .map(|c| Confusion::from_estimate(&decode(c), c.truth).total_error())
        .sum::<f64>()
        / cases.len() as f64
}

/// Threshold minimising the mean `FPR + FNR` over `cases`. Candidates are
/// the distinct score values, which realise every distinct decision.
/// Returns the threshold and its mean total error.
pub fn tune_coma(cases: &[TuningCase]) -> (f64, f64) {
    assert!(!cases.is_empty(), "no tuning cases");
    let scores: Vec<Vec<f64>> = cases.iter().map(|c| coma_scores(c.a, c.y)).collect();
    let mut candidates: Vec<f64> = scores.iter().flatten().copied().collect();
    candidates.push(1.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (1.0, f64::INFINITY);
    for &t in &candidates {
        let err = cases
            .iter()
            .zip(&scores)
            .map(|(c, s)| {
                let est: Vec<bool> = s.iter().map(|&f| f >= t).collect();
                Confusion::from_estimate(&est, c.truth).total_error()
            })
            .sum::<f64>()
            / cases.len() as f64;
        if err < best.1 {
            best = (t, err);
        }
    }
    best
}

/// Slack in `0..=max_slack` minimising the mean `FPR + FNR`.
pub fn tune_dd(cases: &[TuningCase], max_slack: usize) -> (usize, f64) {
    assert!(!cases.is_empty(), "no tuning cases");
    let mut best = (0, f64::INFINITY);
    for slack in 0..=max_slack {
        let cfg = BaselineConfig {
            dd_negative_slack: slack,
            ..Default::default()
        };
        let err = mean_total_error(cases, |c| noisy_dd(c.a, c.y, &cfg));
        if err < best.1 {
            best = (slack, err);
        }
    }
    best
}
