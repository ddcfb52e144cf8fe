//! Bisection of the cross-family contact rate onto a target prevalence.
//!
//! Prevalence is measured after generation: the fraction of infected
//! individuals on the days the weekly tests measure, averaged over test days
//! and pilot seeds.

use gampsi_core::regime::{test_day_prevalence, RegimeConfig};
use gampsi_core::sim::{simulate, SimConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub target: f64,
    pub pilot_seeds: u64,
    /// Bracket on the cross rate, searched in log space.
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl CalibrationConfig {
    pub fn new(target: f64) -> Self {
        Self {
            target,
            pilot_seeds: 400,
            lo: 1e-5,
            hi: 5e-2,
            iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub cross_rate: f64,
    pub prevalence: f64,
}

/// Mean test-day prevalence of `sim` over `seeds` pilot seeds starting at `sim.seed`.
pub fn mean_prevalence(sim: &SimConfig, regime: &RegimeConfig, seeds: u64) -> Result<f64> {
    let per_seed = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let out = simulate(&SimConfig {
                seed: sim.seed.wrapping_add(k),
                ..sim.clone()
            })?;
            let p = test_day_prevalence(&out, regime);
            Ok(p.iter().sum::<f64>() / p.len().max(1) as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64)
}

/// Find the cross rate whose mean prevalence is closest to the target.
pub fn calibrate_cross_rate(sim: &SimConfig, regime: &RegimeConfig, cal: &CalibrationConfig) -> Result<Calibration> {
    if !(cal.lo > 0.0 && cal.lo < cal.hi && cal.hi <= 1.0) {
        return Err(Error::Config(
            "calibration bracket must satisfy 0 < lo < hi <= 1".into(),
        ));
    }
    if !(cal.target > 0.0 && cal.target < 1.0) || cal.pilot_seeds == 0 {
        return Err(Error::Config(
            "calibration needs a target in (0, 1) and at least one seed".into(),
        ));
    }
    let eval = |rate: f64| {
        mean_prevalence(
            &SimConfig {
                cross_rate: rate,
                ..sim.clone()
            },
            regime,
            cal.pilot_seeds,
        )
    };
    let (mut lo, mut hi) = (cal.lo.ln(), cal.hi.ln());
    let (p_lo, p_hi) = (eval(cal.lo)?, eval(cal.hi)?);
    if cal.target <= p_lo {
        return Ok(Calibration {
            cross_rate: cal.lo,
            prevalence: p_lo,
        });
    }
    if cal.target >= p_hi {
        return Ok(Calibration {
            cross_rate: cal.hi,
            prevalence: p_hi,
        });
    }
    let mut best = Calibration {
        cross_rate: cal.lo,
        prevalence: p_lo,
    };
    for _ in 0..cal.iterations {
        let mid = 0.5 * (lo + hi);
        let p = eval(mid.exp())?;
        log::debug!("cross rate {:.3e} -> prevalence {:.4}", mid.exp(), p);
        if (p - cal.target).abs() < (best.prevalence - cal.target).abs() {
            best = Calibration {
                cross_rate: mid.exp(),
                prevalence: p,
            };
        }
        if p < cal.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
