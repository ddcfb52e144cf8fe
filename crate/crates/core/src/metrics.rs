//! Confusion counts, ROC sweeps and operating points.
//!
//! An individual is declared positive when `x̂_i ≥ τ`.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_estimate(estimate: &[bool], truth: &[u8]) -> Self {
        assert_eq!(estimate.len(), truth.len(), "estimate and truth lengths differ");
        let mut c = Self::default();
        for (&e, &t) in estimate.iter().zip(truth) {
            match (e, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    /// `None` without true negatives.
    pub fn fpr(&self) -> Option<f64> {
        (self.negatives() > 0).then(|| self.fp as f64 / self.negatives() as f64)
    }

    /// `None` without true positives.
    pub fn fnr(&self) -> Option<f64> {
        (self.positives() > 0).then(|| self.fn_ as f64 / self.positives() as f64)
    }

    /// `FPR + FNR`, treating an undefined rate as zero.
    pub fn total_error(&self) -> f64 {
        self.fpr().unwrap_or(0.0) + self.fnr().unwrap_or(0.0)
    }

    pub fn errors(&self) -> usize {
        self.fp + self.fn_
    }

    pub fn is_exact(&self) -> bool {
        self.errors() == 0
    }
}

impl core::ops::Add for Confusion {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    pub threshold: f64,
    pub confusion: Confusion,
}

impl RocPoint {
    pub fn fpr(&self) -> f64 {
        self.confusion.fpr().unwrap_or(0.0)
    }

    pub fn fnr(&self) -> Option<f64> {
        self.confusion.fnr()
    }

    pub fn total_error(&self) -> f64 {
        self.confusion.total_error()
    }
}

/// Performance at one operating threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub threshold: f64,
    pub confusion: Confusion,
    pub fpr: f64,
    pub fnr: Option<f64>,
    pub total_error: f64,
    /// Exact recovery.
    pub success: bool,
}

impl From<RocPoint> for Metrics {
    fn from(p: RocPoint) -> Self {
        Self {
            threshold: p.threshold,
            confusion: p.confusion,
            fpr: p.fpr(),
            fnr: p.fnr(),
            total_error: p.total_error(),
            success: p.confusion.is_exact(),
        }
    }
}

impl Metrics {
    pub fn at_threshold(xhat: &[f64], truth: &[u8], threshold: f64) -> Self {
        let est: Vec<bool> = xhat.iter().map(|&x| x >= threshold).collect();
        RocPoint {
            threshold,
            confusion: Confusion::from_estimate(&est, truth),
        }
        .into()
    }

    pub fn from_estimate(estimate: &[bool], truth: &[u8]) -> Self {
        RocPoint {
            threshold: f64::NAN,
            confusion: Confusion::from_estimate(estimate, truth),
        }
        .into()
    }
}

/// `0, step, 2·step, …, 1`.
pub fn threshold_grid(step: f64) -> Vec<f64> {
    assert!(step > 0.0 && step <= 1.0, "threshold step must lie in (0, 1]");
    let count = libm::round(1.0 / step) as usize;
    (0..=count).map(|k| k as f64 / count as f64).collect()
}

/// Confusion counts for every threshold. `thresholds` must be ascending.
pub fn roc_sweep(xhat: &[f64], truth: &[u8], thresholds: &[f64]) -> Vec<RocPoint> {
    assert_eq!(xhat.len(), truth.len(), "estimate and truth lengths differ");
    debug_assert!(thresholds.windows(2).all(|w| w[0] <= w[1]), "thresholds not ascending");
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&x, &t) in xhat.iter().zip(truth) {
        if t != 0 {
            pos.push(x);
        } else {
            neg.push(x);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    thresholds
        .iter()
        .map(|&threshold| {
            let p_below = pos.partition_point(|&x| x < threshold);
            let n_below = neg.partition_point(|&x| x < threshold);
            RocPoint {
                threshold,
                confusion: Confusion {
                    tp: pos.len() - p_below,
                    fn_: p_below,
                    fp: neg.len() - n_below,
                    tn: n_below,
                },
            }
        })
        .collect()
}

/// Point minimising `FPR + FNR`; ties go to the lower FNR, then to the
/// earlier point.
pub fn select_operating_point(roc: &[RocPoint]) -> Option<RocPoint> {
    let mut best: Option<RocPoint> = None;
    for p in roc {
        let better = match &best {
            None => true,
            Some(b) => {
                let (e, eb) = (p.total_error(), b.total_error());
                e < eb || (e == eb && p.fnr().unwrap_or(0.0) < b.fnr().unwrap_or(0.0))
            }
        };
        if better {
            best = Some(*p);
        }
    }
    best
}

/// Fraction of runs with exact recovery.
pub fn success_probability(runs: &[Metrics]) -> Option<f64> {
    (!runs.is_empty()).then(|| runs.iter().filter(|m| m.success).count() as f64 / runs.len() as f64)
}

/// Averages over a series of test days.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub days: usize,
    pub mean_fpr: f64,
    /// Mean over days with at least one true positive.
    pub mean_fnr: Option<f64>,
    /// Days excluded from `mean_fnr`.
    pub fnr_not_applicable: usize,
    /// `mean_fpr + mean_fnr`.
    pub mean_total_error: f64,
    /// Counts summed over all days.
    pub pooled: Confusion,
    pub success_rate: f64,
}

pub fn summarize(days: &[Metrics]) -> Option<Summary> {
    if days.is_empty() {
        return None;
    }
    let n = days.len() as f64;
    let mean_fpr = days.iter().map(|m| m.fpr).sum::<f64>() / n;
    let fnrs: Vec<f64> = days.iter().filter_map(|m| m.fnr).collect();
    let mean_fnr = (!fnrs.is_empty()).then(|| fnrs.iter().sum::<f64>() / fnrs.len() as f64);
    if fnrs.len() < days.len() {
        log::info!(
            "{} of {} test days have no positives; FNR not applicable",
            days.len() - fnrs.len(),
            days.len()
        );
    }
    Some(Summary {
        days: days.len(),
        mean_fpr,
        mean_fnr,
        fnr_not_applicable: days.len() - fnrs.len(),
        mean_total_error: mean_fpr + mean_fnr.unwrap_or(0.0),
        pooled: days.iter().fold(Confusion::default(), |a, m| a + m.confusion),
        success_rate: success_probability(days).unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn sweep_endpoints() {
        let xhat = [0.1, 0.9, 0.4, 0.0];
        let truth = [0, 1, 1, 0];
        let roc = roc_sweep(&xhat, &truth, &[0.0, 1.5]);
        assert_eq!(roc[0].fnr(), Some(0.0));
        assert_eq!(roc[0].fpr(), 1.0);
        assert_eq!(roc[1].fnr(), Some(1.0));
        assert_eq!(roc[1].fpr(), 0.0);
    }

    #[test]
    fn perfect_estimate_reaches_origin() {
        let truth = [0u8, 1, 0, 1, 1];
        let xhat: Vec<f64> = truth.iter().map(|&t| t as f64).collect();
        let roc = roc_sweep(&xhat, &truth, &threshold_grid(0.001));
        let op = select_operating_point(&roc).unwrap();
        assert_eq!(op.total_error(), 0.0);
        assert!(Metrics::from(op).success);
    }

    #[test]
    fn grid_is_exact() {
        let g = threshold_grid(0.001);
        assert_eq!(g.len(), 1001);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[500], 0.5);
        assert_eq!(g[1000], 1.0);
    }

    #[test]
    fn single_point_sweep() {
        let p = RocPoint {
            threshold: 0.3,
            confusion: Confusion {
                tp: 1,
                fp: 2,
                tn: 3,
                fn_: 4,
            },
        };
        assert_eq!(select_operating_point(&[p]), Some(p));
        assert_eq!(select_operating_point(&[]), None);
    }

    #[test]
    fn tie_prefers_lower_fnr() {
        // Both have total 0.5: (fpr 0, fnr 0.5) and (fpr 0.5, fnr 0).
        let a = RocPoint {
            threshold: 0.1,
            confusion: Confusion {
                tp: 1,
                fp: 0,
                tn: 2,
                fn_: 1,
            },
        };
        let b = RocPoint {
            threshold: 0.2,
            confusion: Confusion {
                tp: 2,
                fp: 1,
                tn: 1,
                fn_: 0,
            },
        };
        assert_eq!(a.total_error(), b.total_error());
        assert_eq!(select_operating_point(&[a, b]).unwrap().threshold, 0.2);
        assert_eq!(select_operating_point(&[b, a]).unwrap().threshold, 0.2);
    }

    #[test]
    fn success_probability_counts() {
        let ok = Metrics::from_estimate(&[true, false], &[1, 0]);
        let bad = Metrics::from_estimate(&[true, true], &[1, 0]);
        assert_eq!(success_probability(&[ok, ok]), Some(1.0));
        assert_eq!(success_probability(&[bad]), Some(0.0));
        assert_eq!(success_probability(&[ok, bad, bad, ok, ok]), Some(0.6));
        assert_eq!(success_probability(&[]), None);
    }

    #[test]
    fn summary_excludes_undefined_fnr() {
        let a = Metrics::from_estimate(&[true, false, false], &[1, 1, 0]); // fnr 0.5
        let b = Metrics::from_estimate(&[true, false, false], &[0, 0, 0]); // no positives
        let s = summarize(&[a, b]).unwrap();
        assert_eq!(s.mean_fnr, Some(0.5));
        assert_eq!(s.fnr_not_applicable, 1);
        assert!((s.mean_fpr - (0.0 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(s.pooled.tp + s.pooled.fn_, 2);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (1usize..60).prop_flat_map(|n| (prop::collection::vec(0.0f64..=1.0, n), prop::collection::vec(0u8..2, n)))
    }

    proptest! {
        #[test]
        fn roc_is_monotone_and_conserves_counts((xhat, truth) in instance()) {
            let grid = threshold_grid(0.01);
            let roc = roc_sweep(&xhat, &truth, &grid);
            let pos = truth.iter().filter(|&&t| t == 1).count();
            for w in roc.windows(2) {
                prop_assert!(w[1].fpr() <= w[0].fpr());
                prop_assert!(w[1].fnr().unwrap_or(0.0) >= w[0].fnr().unwrap_or(0.0));
            }
            for p in &roc {
                prop_assert_eq!(p.confusion.positives(), pos);
                prop_assert_eq!(p.confusion.negatives(), truth.len() - pos);
                let direct = Metrics::at_threshold(&xhat, &truth, p.threshold);
                prop_assert_eq!(direct.confusion, p.confusion);
            }
        }

        #[test]
        fn operating_point_matches_linear_scan((xhat, truth) in instance()) {
            let roc = roc_sweep(&xhat, &truth, &threshold_grid(0.05));
            let op = select_operating_point(&roc).unwrap();
            let min = roc.iter().map(|p| p.total_error()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(op.total_error(), min);
            let first = roc
                .iter()
                .filter(|p| p.total_error() == min)
                .min_by(|a, b| a.fnr().unwrap_or(0.0).total_cmp(&b.fnr().unwrap_or(0.0)))
                .unwrap();
            prop_assert_eq!(op.threshold, first.threshold);
        }
    }

    #[test]
    fn conservation_small() {
        let c = Confusion::from_estimate(&[true, false, true], &[1, 1, 0]);
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 0,
                fn_: 1
            }
        );
    }
}
