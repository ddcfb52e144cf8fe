//! Generalized approximate message passing for binary group testing.
//!
//! The output channel treats each pool load `W_j` as Gaussian with mean `k_j`
//! and variance `theta_j`. A test result only tells whether the load is zero
//! or positive, so the likelihood is piecewise constant with a break at
//! [`W_SPLIT`]: the posterior of `W_j` is a mixture of two truncated normals.
//! The input channel is delegated to a [`Denoiser`] that sees pseudo data
//! `v = x + N(0, Delta)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::pooling::{NoiseModel, PoolingMatrix};

/// Boundary between the "load zero" and "load positive" regions of `w`.
pub const W_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GampError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {what} at iteration {iteration}")]
    NonFinite {
        what: &'static str,
        iteration: usize,
        trace: Vec<TraceRow>,
    },
    #[error("invalid GAMP config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GampConfig {
    pub t_max: usize,
    /// Weight of the new iterate, in `(0, 1]`.
    pub damping: f64,
    /// Lower bound for variances and for the precision sums they invert.
    pub delta_floor: f64,
    /// Stop once the mean absolute change of the estimate drops below this.
    pub convergence_tol: f64,
    /// Scale the pseudo-data variance by the population size.
    pub use_one_over_n_factor: bool,
}

impl Default for GampConfig {
    fn default() -> Self {
        Self {
            t_max: 50,
            damping: 0.7,
            delta_floor: 1e-12,
            convergence_tol: 1e-6,
            use_one_over_n_factor: false,
        }
    }
}

impl GampConfig {
    pub fn validate(&self) -> Result<(), GampError> {
        if self.t_max == 0 {
            return Err(GampError::Config("t_max must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(GampError::Config(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.delta_floor > 0.0) {
            return Err(GampError::Config("delta_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Posterior moments of the pool load and the derived GAMP quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMoments {
    /// `E[W | y]`.
    pub mean: f64,
    /// `Var[W | y]`.
    pub var: f64,
    /// `(E[W | y] − k) / theta`.
    pub h: f64,
    /// `−∂h/∂k = (1 − Var/theta) / theta`.
    pub r: f64,
}

/// Output-channel denoiser for one pool with prior `W ~ N(k, theta)`.
///
/// Mixture weights are combined in the log domain and both truncated-normal
/// moments go through scaled-erfc Mills ratios, so no CDF differences are
/// ever formed.
pub fn gout(y: bool, k: f64, theta: f64, noise: &NoiseModel) -> OutputMoments {
    let sigma = math::sqrt(theta);
    let z = (W_SPLIT - k) / sigma;
    let (like_pos, like_zero) = noise.likelihoods(y);

    let log_lower = math::ln(like_zero) + math::ln_norm_cdf(z);
    let log_upper = math::ln(like_pos) + math::ln_norm_cdf(-z);
    let log_total = math::log_add_exp(log_lower, log_upper);
    let w_lower = math::exp(log_lower - log_total);
    let w_upper = math::exp(log_upper - log_total);

    // Standardised moments of each truncated piece.
    let ml = math::mills_lower(z);
    let mu = math::mills_upper(z);
    let var_lower = (1.0 - z * ml - ml * ml).max(0.0);
    let var_upper = (1.0 + z * mu - mu * mu).max(0.0);

    let shift = w_upper * mu - w_lower * ml; // (E − k)/sigma
    let gap = ml + mu; // (E_upper − E_lower)/sigma
    let var_ratio = w_lower * var_lower + w_upper * var_upper + w_lower * w_upper * gap * gap;

    OutputMoments {
        mean: k + sigma * shift,
        var: theta * var_ratio,
        h: shift / sigma,
        r: (1.0 - var_ratio) / theta,
    }
}

/// Input-channel denoiser. Implementations receive the pseudo data and its
/// per-individual noise variance and must write posterior means and
/// variances with `s = xhat·(1 − xhat)`.
pub trait Denoiser {
    /// Prior means used to initialise the iteration.
    fn prior_mean(&self) -> Vec<f64>;

    fn denoise(&mut self, v: &[f64], delta: &[f64], xhat: &mut [f64], s: &mut [f64]);
}

impl<D: Denoiser + ?Sized> Denoiser for &mut D {
    fn prior_mean(&self) -> Vec<f64> {
        (**self).prior_mean()
    }

    fn denoise(&mut self, v: &[f64], delta: &[f64], xhat: &mut [f64], s: &mut [f64]) {
        (**self).denoise(v, delta, xhat, s)
    }
}

/// Iteration state.
#[derive(Debug, Clone, PartialEq)]
pub struct GampState {
    pub xhat: Vec<f64>,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub theta: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    pub t: usize,
}

/// Start from the prior: `xhat = prior`, `s = prior·(1 − prior)`, `h = 0`.
pub fn initialize(n: usize, m: usize, prior: &[f64]) -> Result<GampState, GampError> {
    if prior.len() != n {
        return Err(GampError::Dimension(format!(
            "prior has length {}, expected {n}",
            prior.len()
        )));
    }
    if let Some(p) = prior.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(GampError::Config(format!("prior probability {p} outside [0, 1]")));
    }
    Ok(GampState {
        xhat: prior.to_vec(),
        s: prior.iter().map(|&p| p * (1.0 - p)).collect(),
        h: vec![0.0; m],
        theta: vec![0.0; m],
        k: vec![0.0; m],
        v: vec![0.0; n],
        delta: vec![0.0; n],
        t: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub iter: usize,
    pub mean_abs_change: f64,
    pub mean_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GampOutput {
    pub xhat: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
}

/// Run GAMP until convergence or `t_max` iterations.
pub fn gamp_run<D: Denoiser + ?Sized>(
    a: &PoolingMatrix,
    y: &[u8],
    noise: &NoiseModel,
    denoiser: &mut D,
    config: &GampConfig,
) -> Result<GampOutput, GampError> {
    gamp_run_observed(a, y, noise, denoiser, config, |_| {})
}

/// [`gamp_run`] with a callback invoked on the state after every iteration.
pub fn gamp_run_observed<D, F>(
    a: &PoolingMatrix,
    y: &[u8],
    noise: &NoiseModel,
    denoiser: &mut D,
    config: &GampConfig,
    mut observe: F,
) -> Result<GampOutput, GampError>
where
    D: Denoiser + ?Sized,
    F: FnMut(&GampState),
{
    config.validate()?;
    let (m, n) = (a.m(), a.n());
    if y.len() != m {
        return Err(GampError::Dimension(format!(
            "y has length {}, matrix has {m} rows",
            y.len()
        )));
    }
    let prior = denoiser.prior_mean();
    let mut st = initialize(n, m, &prior)?;
    let floor = config.delta_floor;
    let gamma = config.damping;

    let mut ax = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut r_sum = vec![0.0; n];
    let mut at_h = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut s_new = vec![0.0; n];
    let mut trace = Vec::new();
    let mut converged = false;

    while st.t < config.t_max {
        let iteration = st.t;
        // Output channel.
        a.mul(&st.s, &mut st.theta);
        for th in &mut st.theta {
            if !(*th >= floor) {
                log::debug!("theta {th} clipped to {floor}");
                *th = floor;
            }
        }
        a.mul(&st.xhat, &mut ax);
        for j in 0..m {
            st.k[j] = ax[j] - st.theta[j] * st.h[j];
            let out = gout(y[j] != 0, st.k[j], st.theta[j], noise);
            st.h[j] = gamma * out.h + (1.0 - gamma) * st.h[j];
            r[j] = out.r;
        }

        // Scalar channel.
        a.mul_t(&r, &mut r_sum);
        a.mul_t(&st.h, &mut at_h);
        let scale = if config.use_one_over_n_factor { n as f64 } else { 1.0 };
        for i in 0..n {
            let precision = (r_sum[i] / scale).max(floor);
            st.delta[i] = (1.0 / precision).max(floor);
            st.v[i] = st.xhat[i] + st.delta[i] * at_h[i];
        }

        // Input channel.
        denoiser.denoise(&st.v, &st.delta, &mut x_new, &mut s_new);
        let mut change = 0.0;
        for i in 0..n {
            let x = gamma * x_new[i] + (1.0 - gamma) * st.xhat[i];
            change += (x - st.xhat[i]).abs();
            st.xhat[i] = x;
            st.s[i] = x * (1.0 - x);
        }
        st.t += 1;

        let mean_abs_change = change / n as f64;
        let mean_delta = st.delta.iter().sum::<f64>() / n as f64;
        trace.push(TraceRow {
            iter: iteration,
            mean_abs_change,
            mean_delta,
        });
        if let Some(what) = first_non_finite(&st) {
            return Err(GampError::NonFinite { what, iteration, trace });
        }
        observe(&st);
        if mean_abs_change < config.convergence_tol {
            converged = true;
            break;
        }
    }

    Ok(GampOutput {
        xhat: st.xhat,
        s: st.s,
        v: st.v,
        delta: st.delta,
        trace,
        converged,
    })
}

fn first_non_finite(st: &GampState) -> Option<&'static str> {
    let fields: [(&'static str, &[f64]); 6] = [
        ("xhat", &st.xhat),
        ("h", &st.h),
        ("theta", &st.theta),
        ("k", &st.k),
        ("v", &st.v),
        ("delta", &st.delta),
    ];
    fields
        .into_iter()
        .find(|(_, xs)| xs.iter().any(|x| !x.is_finite()))
        .map(|(name, _)| name)
}
