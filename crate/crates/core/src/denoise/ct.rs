//! Contact-tracing prior.
//!
//! Each contact `(i, j)` on day `d` of the side-information window carries
//! a pairwise infection probability
//!
//! ```text
//! p̂_ij = exp(−1 / (λ·τ·d·Ψ_ij + ε)),   Ψ_ij = 1 − Pr̂(X_i = 0)·Pr̂(X_j = 0)
//! ```
//!
//! and the prior of `i` is one minus the product of `(1 − p̂)` over all its
//! contacts in the window. `λ` is fitted by maximising the marginal
//! likelihood of the pseudo data.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{ct_denoise, log_likelihood_ratio, Reestimate};
use crate::gamp::Denoiser;
use crate::math;
use crate::sim::ContactEvent;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CtError {
    #[error("status estimates missing for days {0:?}")]
    MissingDays(Vec<u32>),
    #[error("status estimates for day {day} have length {len}, expected {n}")]
    StatusLength { day: u32, len: usize, n: usize },
    #[error("status estimate {value} for individual {individual} on day {day} outside [0, 1]")]
    Probability { day: u32, individual: usize, value: f64 },
    #[error("contact ({i}, {j}) outside population of {n}")]
    Contact { i: u32, j: u32, n: usize },
    #[error("invalid window [{start}, {end}]")]
    Window { start: u32, end: u32 },
    #[error("invalid parameter: {0}")]
    Param(String),
}

/// `exp(−1 / (λ·τ·d·Ψ + ε))`.
#[inline]
pub fn pairwise_infection_prob(tau: f64, d: f64, psi: f64, lambda: f64, epsilon: f64) -> f64 {
    math::exp(-1.0 / (lambda * tau * d * psi + epsilon))
}

/// Contacts of one window reduced to `(i, j, τ·d·Ψ)`; the product does not
/// depend on `λ`, so fitting only rescales it.
#[derive(Debug, Clone, PartialEq)]
pub struct CtSideInfo {
    n: usize,
    window: (u32, u32),
    edges: Vec<(u32, u32, f64)>,
}

impl CtSideInfo {
    /// Build from the contacts falling in `[start, end]` and, for every day
    /// of that window, a vector of `Pr̂(X_i = 1)` estimates.
    pub fn new(
        n: usize,
        start: u32,
        end: u32,
        contacts: &[ContactEvent],
        status: &BTreeMap<u32, Vec<f64>>,
    ) -> Result<Self, CtError> {
        if start > end {
            return Err(CtError::Window { start, end });
        }
        let missing: Vec<u32> = (start..=end).filter(|d| !status.contains_key(d)).collect();
        if !missing.is_empty() {
            return Err(CtError::MissingDays(missing));
        }
        for day in start..=end {
            let q = &status[&day];
            if q.len() != n {
                return Err(CtError::StatusLength { day, len: q.len(), n });
            }
            if let Some(i) = q.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(CtError::Probability {
                    day,
                    individual: i,
                    value: q[i],
                });
            }
        }
        let mut edges = Vec::new();
        for c in contacts.iter().filter(|c| c.day >= start && c.day <= end) {
            if c.i as usize >= n || c.j as usize >= n || c.i == c.j {
                return Err(CtError::Contact { i: c.i, j: c.j, n });
            }
            let q = &status[&c.day];
            let psi = 1.0 - (1.0 - q[c.i as usize]) * (1.0 - q[c.j as usize]);
            edges.push((c.i, c.j, c.tau * c.d * psi));
        }
        Ok(Self {
            n,
            window: (start, end),
            edges,
        })
    }

    pub fn population(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> (u32, u32) {
        self.window
    }

    pub fn contact_count(&self) -> usize {
        self.edges.len()
    }

    /// `Σ ln(1 − p̂)` per individual.
    fn log_survival(&self, lambda: f64, epsilon: f64, out: &mut [f64]) {
        out.fill(0.0);
        for &(i, j, base) in &self.edges {
            let p = math::exp(-1.0 / (lambda * base + epsilon));
            let ls = math::ln_1p(-p);
            out[i as usize] += ls;
            out[j as usize] += ls;
        }
    }
}

/// Prior of one individual: `1 − Π (1 − p̂)` over its contacts in the window.
pub fn aggregate_prior(si: &CtSideInfo, individual: usize, lambda: f64, epsilon: f64) -> f64 {
    let ls: f64 = si
        .edges
        .iter()
        .filter(|&&(i, j, _)| i as usize == individual || j as usize == individual)
        .map(|&(_, _, base)| math::ln_1p(-pairwise_infection_prob(1.0, 1.0, base, lambda, epsilon)))
        .sum();
    -math::exp_m1(ls)
}

/// Priors of the whole population.
pub fn aggregate_priors(si: &CtSideInfo, lambda: f64, epsilon: f64) -> Vec<f64> {
    let mut ls = vec![0.0; si.n];
    si.log_survival(lambda, epsilon, &mut ls);
    ls.iter().map(|&l| -math::exp_m1(l)).collect()
}

/// Log-spaced grid plus golden-section refinement for `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaSearch {
    pub lo: f64,
    pub hi: f64,
    pub grid: usize,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        Self {
            lo: 1e-6,
            hi: 1e2,
            grid: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    pub lambda: f64,
    pub log_likelihood: f64,
    /// The likelihood did not vary over the grid.
    pub flat: bool,
}

/// Marginal log-likelihood `Σ_i ln[f(v_i|1)·p_i(λ) + f(v_i|0)·(1 − p_i(λ))]`.
///
/// `background` is an extra independent infection probability folded into
/// every prior.
pub fn lambda_log_likelihood(
    v: &[f64],
    delta: &[f64],
    si: &CtSideInfo,
    lambda: f64,
    epsilon: f64,
    background: f64,
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.resize(si.n, 0.0);
    si.log_survival(lambda, epsilon, scratch);
    let ln_bg = math::ln_1p(-background);
    (0..si.n)
        .map(|i| {
            let survive = scratch[i] + ln_bg;
            let ln_p = math::ln(-math::exp_m1(survive));
            let llr = log_likelihood_ratio(v[i], delta[i]);
            math::ln_normal_pdf(v[i], 0.0, delta[i]) + math::log_add_exp(llr + ln_p, survive)
        })
        .sum()
}

/// Maximum-likelihood `λ` over `[search.lo, search.hi]`.
pub fn ml_estimate_lambda(
    v: &[f64],
    delta: &[f64],
    si: &CtSideInfo,
    epsilon: f64,
    background: f64,
    search: &LambdaSearch,
) -> Result<LambdaEstimate, CtError> {
    if !(search.lo > 0.0 && search.lo <= search.hi) {
        return Err(CtError::Param(alloc::format!(
            "lambda bounds ({}, {})",
            search.lo,
            search.hi
        )));
    }
    if v.len() != si.n || delta.len() != si.n {
        return Err(CtError::Param(alloc::format!(
            "pseudo data length {} / {} for population {}",
            v.len(),
            delta.len(),
            si.n
        )));
    }
    let mut scratch = Vec::new();
    let mut ll = |lambda: f64| lambda_log_likelihood(v, delta, si, lambda, epsilon, background, &mut scratch);

    if search.lo == search.hi || search.grid < 2 {
        let value = ll(search.lo);
        return Ok(LambdaEstimate {
            lambda: search.lo,
            log_likelihood: value,
            flat: false,
        });
    }

    let (a, b) = (math::ln(search.lo), math::ln(search.hi));
    let grid: Vec<f64> = (0..search.grid)
        .map(|k| a + (b - a) * k as f64 / (search.grid - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&g| ll(math::exp(g))).collect();
    let (best, &best_value) =
        values.iter().enumerate().fold(
            (0, &f64::NEG_INFINITY),
            |acc, (k, v)| if *v > *acc.1 { (k, v) } else { acc },
        );
    let worst = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if best_value - worst <= 1e-9 * best_value.abs().max(1.0) {
        log::warn!("flat lambda likelihood; returning grid maximiser");
        return Ok(LambdaEstimate {
            lambda: math::exp(grid[best]),
            log_likelihood: best_value,
            flat: true,
        });
    }

    // Golden-section search in log λ between the neighbours of the best point.
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = ll(math::exp(c));
    let mut fd = ll(math::exp(d));
    for _ in 0..60 {
        if hi - lo < 1e-10 {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = ll(math::exp(c));
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = ll(math::exp(d));
        }
    }
    let (g, f) = if fc > fd { (c, fc) } else { (d, fd) };
    Ok(if f > best_value {
        LambdaEstimate {
            lambda: math::exp(g),
            log_likelihood: f,
            flat: false,
        }
    } else {
        LambdaEstimate {
            lambda: math::exp(grid[best]),
            log_likelihood: best_value,
            flat: false,
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CtConfig {
    pub epsilon: f64,
    /// Probability of infection from outside the traced contacts.
    pub background: f64,
    /// `λ` used before the first fit, or throughout when never re-estimated.
    pub initial_lambda: f64,
    pub reestimate: Reestimate,
    pub search: LambdaSearch,
}

impl Default for CtConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            background: 2e-3,
            initial_lambda: 0.1,
            reestimate: Reestimate::Once,
            search: LambdaSearch::default(),
        }
    }
}

impl CtConfig {
    pub fn validate(&self) -> Result<(), CtError> {
        if !(self.epsilon > 0.0) {
            return Err(CtError::Param("epsilon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.background) {
            return Err(CtError::Param("background must lie in [0, 1)".into()));
        }
        if !(self.initial_lambda > 0.0) {
            return Err(CtError::Param("initial lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Scalar denoiser with contact-tracing priors.
#[derive(Debug, Clone)]
pub struct CtDenoiser {
    si: CtSideInfo,
    config: CtConfig,
    lambda: f64,
    priors: Vec<f64>,
    fitted: bool,
}

impl CtDenoiser {
    pub fn new(si: CtSideInfo, config: CtConfig) -> Result<Self, CtError> {
        config.validate()?;
        let lambda = config.initial_lambda;
        let priors = with_background(aggregate_priors(&si, lambda, config.epsilon), config.background);
        Ok(Self {
            si,
            config,
            lambda,
            priors,
            fitted: false,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    fn refit(&mut self, v: &[f64], delta: &[f64]) {
        let c = &self.config;
        match ml_estimate_lambda(v, delta, &self.si, c.epsilon, c.background, &c.search) {
            Ok(est) => {
                self.lambda = est.lambda;
                self.priors = with_background(aggregate_priors(&self.si, est.lambda, c.epsilon), c.background);
            }
            Err(e) => log::warn!("lambda fit failed, keeping {}: {e}", self.lambda),
        }
        self.fitted = true;
    }
}

fn with_background(mut priors: Vec<f64>, background: f64) -> Vec<f64> {
    if background > 0.0 {
        for p in &mut priors {
            *p = 1.0 - (1.0 - background) * (1.0 - *p);
        }
    }
    priors
}

impl Denoiser for CtDenoiser {
    fn prior_mean(&self) -> Vec<f64> {
        self.priors.clone()
    }

    fn denoise(&mut self, v: &[f64], delta: &[f64], xhat: &mut [f64], s: &mut [f64]) {
        let refit = match self.config.reestimate {
            Reestimate::Never => false,
            Reestimate::Once => !self.fitted,
            Reestimate::EveryIteration => true,
        };
        if refit {
            self.refit(v, delta);
        }
        for i in 0..v.len() {
            (xhat[i], s[i]) = ct_denoise(v[i], delta[i], self.priors[i]);
        }
    }
}
