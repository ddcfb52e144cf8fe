//! Experiment studies over seeds and conditions.
//!
//! Each (condition, seed) cell simulates an epidemic, runs the weekly regime
//! and is written to its own JSON file; cells run in parallel and the
//! aggregate table is built afterwards in a single pass.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use gampsi_core::baselines::{noisy_coma, noisy_dd, tune_coma, tune_dd, BaselineConfig, TuningCase};
use gampsi_core::metrics::{summarize, Confusion, Metrics, RocPoint, Summary};
use gampsi_core::regime::{regime_measurements, run_weekly_regime, test_day_prevalence, RegimeConfig};
use gampsi_core::sim::{simulate, SimOutput};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, DenoiserKind};
use crate::error::{Error, Result};
use crate::io::write_json;

/// Offset that separates baseline-tuning seeds from evaluation seeds.
pub const TUNING_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Roc,
    Weekly,
    PExcluded,
    SiPeriod,
    BaselineCompare,
}

impl Study {
    pub const ALL: [Study; 5] = [
        Study::Roc,
        Study::Weekly,
        Study::PExcluded,
        Study::SiPeriod,
        Study::BaselineCompare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Study::Roc => "roc",
            Study::Weekly => "weekly",
            Study::PExcluded => "p_excluded",
            Study::SiPeriod => "si_period",
            Study::BaselineCompare => "baseline_compare",
        }
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Study::ALL.iter().map(|s| s.as_str()).collect();
            Error::Config(format!("unknown study `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Decoder of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gamp(DenoiserKind),
    Coma,
    Dd,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Gamp(k) => k.to_string(),
            Method::Coma => "coma".into(),
            Method::Dd => "dd".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub condition: String,
    pub method: Method,
    pub m: usize,
    pub p_excluded: f64,
    pub startup_period: u32,
    pub first_test_day: Option<u32>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocArrays {
    pub threshold: Vec<f64>,
    pub fpr: Vec<f64>,
    pub fnr: Vec<Option<f64>>,
}

impl From<&[RocPoint]> for RocArrays {
    fn from(roc: &[RocPoint]) -> Self {
        Self {
            threshold: roc.iter().map(|p| p.threshold).collect(),
            fpr: roc.iter().map(|p| p.fpr()).collect(),
            fnr: roc.iter().map(|p| p.fnr()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub day: u32,
    pub positives: usize,
    pub confusion: Confusion,
    pub fpr: f64,
    pub fnr: Option<f64>,
    pub total_error: f64,
    /// Operating threshold; absent for the binary baselines.
    pub threshold: Option<f64>,
    pub success: bool,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub lambda: Option<f64>,
    pub roc: Option<RocArrays>,
}

impl TestResult {
    fn from_metrics(day: u32, truth: &[u8], m: &Metrics) -> Self {
        Self {
            day,
            positives: truth.iter().filter(|&&t| t == 1).count(),
            confusion: m.confusion,
            fpr: m.fpr,
            fnr: m.fnr,
            total_error: m.total_error,
            threshold: m.threshold.is_finite().then_some(m.threshold),
            success: m.success,
            iterations: None,
            converged: None,
            lambda: None,
            roc: None,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            threshold: self.threshold.unwrap_or(f64::NAN),
            confusion: self.confusion,
            fpr: self.fpr,
            fnr: self.fnr,
            total_error: self.total_error,
            success: self.success,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_digest: String,
    pub study: Study,
    pub cell: Cell,
    /// Mean prevalence over the measured days.
    pub sparsity: f64,
    pub tests: Vec<TestResult>,
    pub summary: Summary,
    /// Baseline settings used by this cell, if any.
    pub baseline: Option<BaselineConfig>,
}

impl RunResult {
    pub fn metrics(&self) -> Vec<Metrics> {
        self.tests.iter().map(TestResult::metrics).collect()
    }
}

/// One row of the plotting table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub condition: String,
    pub m: usize,
    pub sparsity: f64,
    pub fpr: f64,
    pub fnr: Option<f64>,
    pub threshold: Option<f64>,
    pub success: f64,
}

/// Cells of a study, in a fixed order.
pub fn plan(config: &Config, study: Study) -> Vec<Cell> {
    let e = &config.experiment;
    let r = &config.regime;
    let mut conditions: Vec<(String, Method, usize, f64, u32)> = Vec::new();
    let mut first_test_day = r.first_test_day;
    match study {
        Study::Roc => {
            for &kind in &e.denoisers {
                for &m in &e.m_grid {
                    conditions.push((
                        format!("{kind}/m{m}"),
                        Method::Gamp(kind),
                        m,
                        r.p_excluded,
                        r.startup_period,
                    ));
                }
            }
        }
        Study::Weekly => {
            let kind = config.denoiser;
            conditions.push((
                format!("{kind}/m{}", r.pools),
                Method::Gamp(kind),
                r.pools,
                r.p_excluded,
                r.startup_period,
            ));
        }
        Study::PExcluded => {
            for &p in &e.p_excluded_grid {
                conditions.push((
                    format!("p_excluded={p}"),
                    Method::Gamp(DenoiserKind::Ct),
                    r.pools,
                    p,
                    r.startup_period,
                ));
            }
        }
        Study::SiPeriod => {
            // Every condition tests on the same days, so only the window length differs.
            let latest = e.startup_grid.iter().copied().max().unwrap_or(r.startup_period);
            first_test_day = Some(r.first_test_day.unwrap_or(latest).max(latest));
            for &s in &e.startup_grid {
                conditions.push((
                    format!("startup={s}"),
                    Method::Gamp(DenoiserKind::Ct),
                    r.pools,
                    r.p_excluded,
                    s,
                ));
            }
        }
        Study::BaselineCompare => {
            for method in [
                Method::Gamp(DenoiserKind::Ct),
                Method::Gamp(DenoiserKind::Family),
                Method::Coma,
                Method::Dd,
            ] {
                conditions.push((method.label(), method, r.pools, r.p_excluded, r.startup_period));
            }
        }
    }
    let mut cells = Vec::new();
    for (condition, method, m, p_excluded, startup_period) in conditions {
        for k in 0..e.replicates {
            cells.push(Cell {
                condition: condition.clone(),
                method,
                m,
                p_excluded,
                startup_period,
                first_test_day,
                seed: config.sim.seed.wrapping_add(k),
            });
        }
    }
    cells
}

fn simulate_seed(config: &Config, seed: u64) -> Result<SimOutput> {
    Ok(simulate(&gampsi_core::SimConfig {
        seed,
        ..config.sim.clone()
    })?)
}

fn cell_regime(config: &Config, cell: &Cell, kind: DenoiserKind) -> RegimeConfig {
    RegimeConfig {
        p_excluded: cell.p_excluded,
        startup_period: cell.startup_period,
        first_test_day: cell.first_test_day,
        ..config.regime_with(kind, cell.m, cell.seed)
    }
}

/// Tune both baselines on seeds disjoint from the evaluation seeds.
pub fn tune_baselines(config: &Config, m: usize) -> Result<BaselineConfig> {
    let e = &config.experiment;
    let data: Vec<_> = (0..e.tuning_replicates.max(1))
        .into_par_iter()
        .map(|k| {
            let seed = config.sim.seed.wrapping_add(TUNING_SEED_OFFSET).wrapping_add(k);
            let sim = simulate_seed(config, seed)?;
            let regime = config.regime_with(DenoiserKind::Ct, m, seed);
            Ok(regime_measurements(&sim, &regime)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let cases: Vec<TuningCase> = data
        .iter()
        .flat_map(|(a, tests)| {
            tests.iter().map(move |t| TuningCase {
                a,
                y: &t.y,
                truth: &t.truth,
            })
        })
        .collect();
    let (coma_threshold, _) = tune_coma(&cases);
    let (dd_negative_slack, _) = tune_dd(&cases, e.dd_max_slack);
    Ok(BaselineConfig {
        coma_threshold,
        dd_negative_slack,
    })
}

/// Run one cell.
pub fn run_cell(config: &Config, study: Study, cell: &Cell, baseline: Option<BaselineConfig>) -> Result<RunResult> {
    let sim = simulate_seed(config, cell.seed)?;
    let (tests, baseline): (Vec<TestResult>, _) = match cell.method {
        Method::Gamp(kind) => {
            let regime = cell_regime(config, cell, kind);
            let out = run_weekly_regime(&sim, &regime)?;
            let tests = out
                .tests
                .iter()
                .map(|t| TestResult {
                    iterations: Some(t.iterations),
                    converged: Some(t.converged),
                    lambda: t.lambda,
                    roc: config.experiment.keep_roc.then(|| RocArrays::from(t.roc.as_slice())),
                    ..TestResult::from_metrics(t.day, &t.truth, &t.metrics)
                })
                .collect();
            (tests, None)
        }
        Method::Coma | Method::Dd => {
            let b = baseline.ok_or_else(|| Error::Config("baseline cell without tuned settings".into()))?;
            let regime = cell_regime(config, cell, DenoiserKind::Ct);
            let (a, measurements) = regime_measurements(&sim, &regime)?;
            let tests = measurements
                .iter()
                .map(|t| {
                    let est = if cell.method == Method::Coma {
                        noisy_coma(&a, &t.y, &b)
                    } else {
                        noisy_dd(&a, &t.y, &b)
                    };
                    TestResult::from_metrics(t.day, &t.truth, &Metrics::from_estimate(&est, &t.truth))
                })
                .collect();
            (tests, Some(b))
        }
    };
    let regime = cell_regime(config, cell, DenoiserKind::Ct);
    let prevalence = test_day_prevalence(&sim, &regime);
    let metrics: Vec<Metrics> = tests.iter().map(TestResult::metrics).collect();
    let summary = summarize(&metrics).ok_or_else(|| Error::Config("regime produced no tests".into()))?;
    Ok(RunResult {
        config_digest: config.digest(),
        study,
        cell: cell.clone(),
        sparsity: prevalence.iter().sum::<f64>() / prevalence.len().max(1) as f64,
        tests,
        summary,
        baseline,
    })
}

/// Run every cell of `study` in parallel.
pub fn run_study(config: &Config, study: Study) -> Result<Vec<RunResult>> {
    let cells = plan(config, study);
    let baseline = if cells.iter().any(|c| matches!(c.method, Method::Coma | Method::Dd)) {
        let b = tune_baselines(config, config.regime.pools)?;
        log::info!(
            "tuned baselines: coma threshold {}, dd slack {}",
            b.coma_threshold,
            b.dd_negative_slack
        );
        Some(b)
    } else {
        None
    };
    cells
        .par_iter()
        .map(|cell| run_cell(config, study, cell, baseline))
        .collect()
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    Some(if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    })
}

/// Per-condition averages: mean FPR and FNR over runs (FNR over runs where
/// it is defined), median operating threshold over test days, success
/// probability over test days.
pub fn aggregate(runs: &[RunResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, String), Vec<&RunResult>> = BTreeMap::new();
    let mut order: Vec<(usize, String)> = Vec::new();
    for (idx, r) in runs.iter().enumerate() {
        let first = order
            .iter()
            .position(|(_, c)| *c == r.cell.condition)
            .unwrap_or_else(|| {
                order.push((idx, r.cell.condition.clone()));
                order.len() - 1
            });
        groups.entry(order[first].clone()).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let k = rs.len() as f64;
            let fnrs: Vec<f64> = rs.iter().filter_map(|r| r.summary.mean_fnr).collect();
            let days: Vec<&TestResult> = rs.iter().flat_map(|r| &r.tests).collect();
            AggregateRow {
                condition: rs[0].cell.condition.clone(),
                m: rs[0].cell.m,
                sparsity: rs.iter().map(|r| r.sparsity).sum::<f64>() / k,
                fpr: rs.iter().map(|r| r.summary.mean_fpr).sum::<f64>() / k,
                fnr: (!fnrs.is_empty()).then(|| fnrs.iter().sum::<f64>() / fnrs.len() as f64),
                threshold: median(days.iter().filter_map(|t| t.threshold).collect()),
                success: days.iter().filter(|t| t.success).count() as f64 / days.len().max(1) as f64,
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["condition", "m", "sparsity", "fpr", "fnr", "threshold", "success"])
        .map_err(|e| Error::format(path, e))?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.condition.clone(),
            r.m.to_string(),
            r.sparsity.to_string(),
            r.fpr.to_string(),
            opt(r.fnr),
            opt(r.threshold),
            r.success.to_string(),
        ])
        .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// File name of a cell's result.
pub fn run_file_name(cell: &Cell) -> String {
    let safe: String = cell
        .condition
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}__seed{}.json", cell.seed)
}

pub fn write_run(dir: &Path, run: &RunResult) -> Result<String> {
    let name = run_file_name(&run.cell);
    write_json(&dir.join(&name), run)?;
    Ok(name)
}
