//! Input-channel denoisers for binary health status.
//!
//! All denoisers compute the posterior mean of `X_i ∈ {0, 1}` from pseudo
//! data `v_i = x_i + N(0, Delta_i)`. They differ only in the prior:
//!
//! - [`IidDenoiser`]: one prevalence for everyone.
//! - [`FamilyDenoiser`]: a family is viral with probability `pi_vf`; members
//!   of a viral family are independently infected with probability `pi_ind`.
//! - [`CtDenoiser`]: a per-individual prior aggregated from contact-tracing
//!   events over the side-information window.

mod ct;
mod family;

use alloc::vec;
use alloc::vec::Vec;

use crate::gamp::Denoiser;
use crate::math;

pub use ct::{
    aggregate_prior, aggregate_priors, lambda_log_likelihood, ml_estimate_lambda, pairwise_infection_prob, CtConfig,
    CtDenoiser, CtError, CtSideInfo, LambdaEstimate, LambdaSearch,
};
pub use family::{
    family_denoise, family_log_likelihood, family_viral_posterior, plugin_estimate_family_params, FamilyConfig,
    FamilyDenoiser, FamilyError, FamilyParams, FamilySearch, FamilyStructure,
};

/// How often a denoiser re-fits its plug-in parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Reestimate {
    /// Fit once from the first pseudo data, then freeze.
    #[default]
    Once,
    /// Fit again at every iteration.
    EveryIteration,
    /// Never fit; keep the configured parameters.
    Never,
}

/// Posterior `Pr(X = 1 | v)` for a scalar prior `prior`.
///
/// Prior 0 or 1 is returned unchanged.
#[inline]
pub fn ct_denoise(v: f64, delta: f64, prior: f64) -> (f64, f64) {
    if prior <= 0.0 {
        return (0.0, 0.0);
    }
    if prior >= 1.0 {
        return (1.0, 0.0);
    }
    let x = math::logistic(math::logit(prior) + (v - 0.5) / delta);
    (x, x * (1.0 - x))
}

/// Log density of the pseudo data under `X = 1` minus under `X = 0`.
#[inline]
pub(crate) fn log_likelihood_ratio(v: f64, delta: f64) -> f64 {
    (v - 0.5) / delta
}

/// Bernoulli prior with a single prevalence.
#[derive(Debug, Clone)]
pub struct IidDenoiser {
    prior: Vec<f64>,
}

impl IidDenoiser {
    pub fn new(n: usize, prevalence: f64) -> Self {
        Self {
            prior: vec![prevalence; n],
        }
    }

    pub fn from_priors(prior: Vec<f64>) -> Self {
        Self { prior }
    }
}

impl Denoiser for IidDenoiser {
    fn prior_mean(&self) -> Vec<f64> {
        self.prior.clone()
    }

    fn denoise(&mut self, v: &[f64], delta: &[f64], xhat: &mut [f64], s: &mut [f64]) {
        for i in 0..v.len() {
            (xhat[i], s[i]) = ct_denoise(v[i], delta[i], self.prior[i]);
        }
    }
}
