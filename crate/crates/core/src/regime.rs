//! Weekly testing regime.
//!
//! The first group test happens on day `first_test_day` (by default
//! `startup_period`); its contact-tracing prior is built from the
//! `startup_period` days before it, where status estimates are
//! the true daily statuses except for an excluded fraction of the population
//! that gets `replacement_prior` instead. Every later test, `test_period`
//! days apart, uses the previous test's posterior as the status estimate over
//! its `si_period`-day window. A test on day `T` measures the end-of-day
//! state of `T − 1`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;

use crate::baselines::{noisy_coma, noisy_dd, BaselineConfig};
use crate::denoise::{
    CtConfig, CtDenoiser, CtError, CtSideInfo, FamilyConfig, FamilyDenoiser, FamilyStructure, IidDenoiser,
};
use crate::gamp::{gamp_run, GampConfig, GampError, GampOutput};
use crate::metrics::{roc_sweep, select_operating_point, threshold_grid, Metrics, RocPoint};
use crate::pooling::{build_triple_design, measure, NoiseModel, PoolingError, PoolingMatrix};
use crate::rng::stage_rng;
use crate::sim::SimOutput;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegimeError {
    #[error("invalid regime config: {0}")]
    Config(String),
    #[error(transparent)]
    Pooling(#[from] PoolingError),
    #[error(transparent)]
    Gamp(#[from] GampError),
    #[error(transparent)]
    Ct(#[from] CtError),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DenoiserChoice {
    Ct(CtConfig),
    Family(FamilyConfig),
    Iid { prevalence: f64 },
}

impl DenoiserChoice {
    pub fn name(&self) -> &'static str {
        match self {
            DenoiserChoice::Ct(_) => "ct",
            DenoiserChoice::Family(_) => "family",
            DenoiserChoice::Iid { .. } => "iid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeConfig {
    /// Days between group tests.
    pub test_period: u32,
    /// Side-information window of the first test.
    pub startup_period: u32,
    /// Day of the first test; `None` tests first on day `startup_period`.
    pub first_test_day: Option<u32>,
    /// Side-information window of every later test.
    pub si_period: u32,
    /// Fraction of the population whose startup statuses are withheld.
    pub p_excluded: f64,
    pub replacement_prior: f64,
    pub threshold_step: f64,
    /// Number of pools.
    pub pools: usize,
    pub noise: NoiseModel,
    pub gamp: GampConfig,
    pub denoiser: DenoiserChoice,
    /// Also decode every test with these baseline settings.
    pub baselines: Option<BaselineConfig>,
    /// Seed of the pooling matrix, the measurement noise and the exclusions.
    pub seed: u64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self {
            test_period: 7,
            startup_period: 8,
            first_test_day: None,
            si_period: 8,
            p_excluded: 0.0,
            replacement_prior: 0.05,
            threshold_step: 0.001,
            pools: 375,
            noise: NoiseModel::ASYMMETRIC,
            gamp: GampConfig::default(),
            denoiser: DenoiserChoice::Ct(CtConfig::default()),
            baselines: None,
            seed: 0,
        }
    }
}

impl RegimeConfig {
    /// Check the settings for a simulation of `horizon` days.
    pub fn validate(&self, horizon: u32) -> Result<(), RegimeError> {
        self.validate_params()?;
        if horizon < self.first_day() + self.test_period {
            return Err(RegimeError::Config(format!(
                "horizon of {horizon} days is shorter than first test day + test_period = {}",
                self.first_day() + self.test_period
            )));
        }
        Ok(())
    }

    /// Check the settings that do not depend on the horizon.
    pub fn validate_params(&self) -> Result<(), RegimeError> {
        let fail = |m: String| Err(RegimeError::Config(m));
        if self.test_period == 0 {
            return fail("test_period must be at least 1".into());
        }
        if self.startup_period == 0 || self.si_period == 0 {
            return fail("startup_period and si_period must be at least 1".into());
        }
        if self.first_day() < self.startup_period {
            return fail(format!(
                "first test day {} precedes the end of the {}-day startup window",
                self.first_day(),
                self.startup_period
            ));
        }
        if !(0.0..=1.0).contains(&self.p_excluded) {
            return fail(format!("p_excluded {} outside [0, 1]", self.p_excluded));
        }
        if !(0.0..=1.0).contains(&self.replacement_prior) {
            return fail(format!("replacement_prior {} outside [0, 1]", self.replacement_prior));
        }
        if !(self.threshold_step > 0.0 && self.threshold_step <= 1.0) {
            return fail("threshold_step must lie in (0, 1]".into());
        }
        self.gamp.validate()?;
        Ok(())
    }

    /// Day of the first test.
    pub fn first_day(&self) -> u32 {
        self.first_test_day.unwrap_or(self.startup_period)
    }

    /// Days on which a group test happens.
    pub fn test_days(&self, horizon: u32) -> Vec<u32> {
        (0..)
            .map(|k| self.first_day() + k * self.test_period)
            .take_while(|&d| d <= horizon)
            .collect()
    }
}

/// One group test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub day: u32,
    pub truth: Vec<u8>,
    pub y: Vec<u8>,
    pub xhat: Vec<f64>,
    pub roc: Vec<RocPoint>,
    /// At the per-test operating point.
    pub metrics: Metrics,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted contact-tracing rate, if that denoiser was used.
    pub lambda: Option<f64>,
    pub coma: Option<Metrics>,
    pub dd: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeOutput {
    pub matrix: PoolingMatrix,
    pub tests: Vec<TestRecord>,
}

impl RegimeOutput {
    pub fn metrics(&self) -> Vec<Metrics> {
        self.tests.iter().map(|t| t.metrics).collect()
    }
}

/// Status estimates for the startup window: true daily statuses, with the
/// excluded individuals replaced by `replacement_prior`.
pub fn startup_status(sim: &SimOutput, config: &RegimeConfig, start: u32, end: u32) -> BTreeMap<u32, Vec<f64>> {
    let truth: BTreeMap<u32, Vec<u8>> = (start..=end).map(|d| (d, sim.truth(d))).collect();
    mask_startup_status(&truth, sim.config.n, config)
}

/// [`startup_status`] from daily truth vectors.
pub fn mask_startup_status(truth: &BTreeMap<u32, Vec<u8>>, n: usize, config: &RegimeConfig) -> BTreeMap<u32, Vec<f64>> {
    let k = libm::round(config.p_excluded * n as f64) as usize;
    let mut rng = stage_rng(config.seed, "excluded", 0);
    let excluded = sample(&mut rng, n, k.min(n));
    truth
        .iter()
        .map(|(&day, t)| {
            let mut q: Vec<f64> = t.iter().map(|&x| f64::from(x)).collect();
            for i in excluded.iter() {
                q[i] = config.replacement_prior;
            }
            (day, q)
        })
        .collect()
}

/// Prior status estimates held constant over `[start, end]`.
fn carried_status(estimate: &[f64], start: u32, end: u32) -> BTreeMap<u32, Vec<f64>> {
    (start..=end).map(|d| (d, estimate.to_vec())).collect()
}

/// Contacts of days `start..=end`.
fn window_contacts(sim: &SimOutput, start: u32, end: u32) -> Vec<crate::sim::ContactEvent> {
    (start..=end)
        .flat_map(|d| sim.contacts[d as usize].iter().copied())
        .collect()
}

/// Decode one measurement vector with the chosen denoiser.
pub fn decode_test(
    a: &PoolingMatrix,
    y: &[u8],
    noise: &NoiseModel,
    gamp: &GampConfig,
    choice: &DenoiserChoice,
    families: Option<&FamilyStructure>,
    side_info: Option<CtSideInfo>,
) -> Result<(GampOutput, Option<f64>), RegimeError> {
    match choice {
        DenoiserChoice::Ct(cfg) => {
            let si = side_info
                .ok_or_else(|| RegimeError::Config("contact-tracing denoiser needs side information".into()))?;
            let mut d = CtDenoiser::new(si, cfg.clone())?;
            let out = gamp_run(a, y, noise, &mut d, gamp)?;
            Ok((out, Some(d.lambda())))
        }
        DenoiserChoice::Family(cfg) => {
            let structure =
                families.ok_or_else(|| RegimeError::Config("family denoiser needs a family structure".into()))?;
            let mut d = FamilyDenoiser::new(structure.clone(), cfg.clone());
            Ok((gamp_run(a, y, noise, &mut d, gamp)?, None))
        }
        DenoiserChoice::Iid { prevalence } => {
            let mut d = IidDenoiser::new(a.n(), *prevalence);
            Ok((gamp_run(a, y, noise, &mut d, gamp)?, None))
        }
    }
}

/// Truth and noisy outcomes of one test.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub day: u32,
    pub truth: Vec<u8>,
    pub y: Vec<u8>,
}

/// The regime's pooling matrix and the measurements of every test day,
/// without decoding.
pub fn regime_measurements(
    sim: &SimOutput,
    config: &RegimeConfig,
) -> Result<(PoolingMatrix, Vec<Measurement>), RegimeError> {
    let horizon = sim.days();
    config.validate(horizon)?;
    let a = build_triple_design(sim.config.n, config.pools, &mut stage_rng(config.seed, "matrix", 0))?;
    let tests = config
        .test_days(horizon)
        .into_iter()
        .enumerate()
        .map(|(index, day)| {
            let truth = sim.truth(day - 1);
            let y = measure(
                &a,
                &truth,
                &config.noise,
                &mut stage_rng(config.seed, "measure", index as u64),
            )?;
            Ok(Measurement { day, truth, y })
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    Ok((a, tests))
}

/// Window and status estimates of the contact-tracing prior for a test on
/// `day`, given the previous test's posterior if there was one.
pub fn side_information(
    sim: &SimOutput,
    config: &RegimeConfig,
    day: u32,
    previous: Option<&[f64]>,
) -> Result<CtSideInfo, RegimeError> {
    let n = sim.config.n;
    let (start, status) = match previous {
        None => {
            let start = day
                .checked_sub(config.startup_period)
                .ok_or_else(|| RegimeError::Config(format!("first test on day {day} precedes the startup window")))?;
            (start, startup_status(sim, config, start, day - 1))
        }
        Some(prev) => {
            let start = day.saturating_sub(config.si_period);
            (start, carried_status(prev, start, day - 1))
        }
    };
    Ok(CtSideInfo::new(
        n,
        start,
        day - 1,
        &window_contacts(sim, start, day - 1),
        &status,
    )?)
}

/// Run every test of the regime over one simulated epidemic.
pub fn run_weekly_regime(sim: &SimOutput, config: &RegimeConfig) -> Result<RegimeOutput, RegimeError> {
    let (a, measurements) = regime_measurements(sim, config)?;
    let grid = threshold_grid(config.threshold_step);
    let mut tests: Vec<TestRecord> = Vec::new();

    for Measurement { day, truth, y } in measurements {
        let side_info = match config.denoiser {
            DenoiserChoice::Ct(_) => Some(side_information(
                sim,
                config,
                day,
                tests.last().map(|t| t.xhat.as_slice()),
            )?),
            _ => None,
        };
        let (out, lambda) = decode_test(
            &a,
            &y,
            &config.noise,
            &config.gamp,
            &config.denoiser,
            Some(&sim.families),
            side_info,
        )?;
        let roc = roc_sweep(&out.xhat, &truth, &grid);
        let metrics = Metrics::from(select_operating_point(&roc).expect("nonempty threshold grid"));
        let (coma, dd) = match &config.baselines {
            Some(b) => (
                Some(Metrics::from_estimate(&noisy_coma(&a, &y, b), &truth)),
                Some(Metrics::from_estimate(&noisy_dd(&a, &y, b), &truth)),
            ),
            None => (None, None),
        };
        log::debug!(
            "test day {day}: {} positives, fpr {:.4}, fnr {:?}, {} iterations",
            truth.iter().filter(|&&t| t == 1).count(),
            metrics.fpr,
            metrics.fnr,
            out.trace.len()
        );
        tests.push(TestRecord {
            day,
            truth,
            y,
            iterations: out.trace.len(),
            converged: out.converged,
            xhat: out.xhat,
            roc,
            metrics,
            lambda,
            coma,
            dd,
        });
    }
    Ok(RegimeOutput { matrix: a, tests })
}

/// Pointwise sum of confusion counts over ROC curves on a common grid.
pub fn pooled_roc(curves: &[&[RocPoint]]) -> Vec<RocPoint> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    let mut pooled = first.to_vec();
    for c in &curves[1..] {
        assert_eq!(c.len(), pooled.len(), "ROC curves on different grids");
        for (p, q) in pooled.iter_mut().zip(c.iter()) {
            p.confusion = p.confusion + q.confusion;
        }
    }
    pooled
}

/// Fraction of the population positive on each test's measured day.
pub fn test_day_prevalence(sim: &SimOutput, config: &RegimeConfig) -> Vec<f64> {
    config
        .test_days(sim.days())
        .into_iter()
        .map(|d| {
            let t = sim.truth(d - 1);
            t.iter().filter(|&&x| x == 1).count() as f64 / t.len() as f64
        })
        .collect()
}
