//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, unknown or repeated keys are
//! errors. Every key has a default, so an empty file is a valid config.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use gampsi_core::denoise::{CtConfig, FamilyConfig, FamilyParams, Reestimate};
use gampsi_core::regime::{DenoiserChoice, RegimeConfig};
use gampsi_core::sim::{SimConfig, SparsityLevel};
use gampsi_core::NoiseModel;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserKind {
    Ct,
    Family,
    Iid,
}

impl DenoiserKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DenoiserKind::Ct => "ct",
            DenoiserKind::Family => "family",
            DenoiserKind::Iid => "iid",
        }
    }
}

impl FromStr for DenoiserKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ct" => Ok(DenoiserKind::Ct),
            "family" => Ok(DenoiserKind::Family),
            "iid" => Ok(DenoiserKind::Iid),
            _ => Err(format!("unknown denoiser `{s}` (expected ct, family or iid)")),
        }
    }
}

impl Display for DenoiserKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grids and replicate counts for the experiment studies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Replicates per condition; replicate `k` uses seed `seed + k`.
    pub replicates: u64,
    pub m_grid: Vec<usize>,
    pub p_excluded_grid: Vec<f64>,
    pub startup_grid: Vec<u32>,
    pub denoisers: Vec<DenoiserKind>,
    /// Replicates used to tune the baselines, on seeds disjoint from the
    /// evaluation seeds.
    pub tuning_replicates: u64,
    pub dd_max_slack: usize,
    /// Store ROC arrays in per-run results.
    pub keep_roc: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            replicates: 10,
            m_grid: vec![150, 300, 375],
            p_excluded_grid: vec![0.0, 0.1, 0.5, 0.75, 1.0],
            startup_grid: vec![4, 8, 12],
            denoisers: vec![DenoiserKind::Ct, DenoiserKind::Family],
            tuning_replicates: 5,
            dd_max_slack: 2,
            keep_roc: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sim: SimConfig,
    /// Regime settings; its `denoiser` field is derived from the fields below.
    pub regime: RegimeConfig,
    pub denoiser: DenoiserKind,
    pub ct: CtConfig,
    pub family: FamilyConfig,
    pub iid_prevalence: f64,
    /// Day whose morning test `pool` simulates (it measures day − 1).
    pub test_day: u32,
    pub experiment: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sim: SimConfig::preset(SparsityLevel::P2_12),
            regime: RegimeConfig::default(),
            denoiser: DenoiserKind::Ct,
            ct: CtConfig::default(),
            family: FamilyConfig::default(),
            iid_prevalence: 0.02,
            test_day: 8,
            experiment: ExperimentConfig::default(),
        }
    }
}

/// Every key with its unit or meaning, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "base seed; every stage derives its own stream"),
    ("n", "population size"),
    ("days", "simulated days, 0..days"),
    ("k1", "days after infection when infectiousness starts"),
    ("k2", "last infectious day after infection"),
    ("infection_period", "days from infection to recovery"),
    (
        "lambda0",
        "transmission rate per viral-load unit, proximity unit and hour",
    ),
    ("p1", "daily stray-infection probability"),
    ("viral_load_max", "viral load drawn uniformly from [1, viral_load_max]"),
    ("family_size_min", "smallest family"),
    ("family_size_max", "largest family"),
    ("cross_rate", "daily contact probability of a cross-family pair"),
    (
        "sparsity_preset",
        "2.12, 3.98, 6.01 or 8.86: sets cross_rate (input only)",
    ),
    ("tau_family_min", "hours"),
    ("tau_family_max", "hours"),
    ("tau_cross_min", "hours"),
    ("tau_cross_max", "hours"),
    ("proximity_min", "proximity factor d"),
    ("proximity_max", "proximity factor d"),
    ("initial_infected", "individuals infected on day 0"),
    ("pools", "number of pools m"),
    ("fp", "Pr(y = 1 | w = 0)"),
    ("fn", "Pr(y = 0 | w > 0)"),
    ("test_period", "days between tests"),
    ("startup_period", "side-information window of the first test, days"),
    ("first_test_day", "day of the first test, or auto for startup_period"),
    ("si_period", "window of later tests, days"),
    ("p_excluded", "fraction of startup statuses withheld"),
    ("replacement_prior", "status estimate used for withheld individuals"),
    ("threshold_step", "ROC threshold spacing"),
    ("test_day", "test day simulated by `pool`"),
    ("t_max", "GAMP iterations"),
    ("damping", "weight of the new iterate, (0, 1]"),
    ("delta_floor", "smallest variance"),
    ("convergence_tol", "mean absolute change that stops GAMP"),
    ("one_over_n", "scale pseudo-data precision by 1/n (true/false)"),
    ("denoiser", "ct, family or iid"),
    ("ct_epsilon", "offset in the pairwise infection probability"),
    ("ct_background", "infection probability from untraced sources"),
    ("ct_initial_lambda", "rate used before the first fit"),
    ("ct_reestimate", "once, every or never"),
    ("ct_lambda_min", "search bound"),
    ("ct_lambda_max", "search bound"),
    ("ct_lambda_grid", "grid points"),
    ("family_pi_vf", "initial viral-family probability"),
    ("family_pi_ind", "initial within-family infection probability"),
    ("family_reestimate", "once, every or never"),
    ("family_grid", "grid points per axis"),
    ("family_refinements", "zoom levels"),
    ("iid_prevalence", "prior of the iid denoiser"),
    ("replicates", "replicates per experiment condition"),
    ("m_grid", "comma-separated pool counts"),
    ("p_excluded_grid", "comma-separated fractions"),
    ("startup_grid", "comma-separated days"),
    ("denoisers", "comma-separated denoisers"),
    ("tuning_replicates", "replicates for baseline tuning"),
    ("dd_max_slack", "largest DD slack tried"),
    ("keep_roc", "store ROC arrays (true/false)"),
];

fn parse_value<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    v.split(',').map(|s| parse_value(s.trim())).collect()
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_reestimate(v: &str) -> Result<Reestimate, String> {
    match v {
        "once" => Ok(Reestimate::Once),
        "every" => Ok(Reestimate::EveryIteration),
        "never" => Ok(Reestimate::Never),
        _ => Err(format!("expected once, every or never, got `{v}`")),
    }
}

fn reestimate_str(r: Reestimate) -> &'static str {
    match r {
        Reestimate::Once => "once",
        Reestimate::EveryIteration => "every",
        Reestimate::Never => "never",
    }
}

fn parse_preset(v: &str) -> Result<SparsityLevel, String> {
    match v {
        "2.12" => Ok(SparsityLevel::P2_12),
        "3.98" => Ok(SparsityLevel::P3_98),
        "6.01" => Ok(SparsityLevel::P6_01),
        "8.86" => Ok(SparsityLevel::P8_86),
        _ => Err(format!("unknown sparsity preset `{v}`")),
    }
}

impl Config {
    /// Apply one setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let s = &mut self.sim;
        let r = &mut self.regime;
        match key {
            "seed" => s.seed = parse_value(v)?,
            "n" => s.n = parse_value(v)?,
            "days" => s.days = parse_value(v)?,
            "k1" => s.k1 = parse_value(v)?,
            "k2" => s.k2 = parse_value(v)?,
            "infection_period" => s.infection_period = parse_value(v)?,
            "lambda0" => s.lambda0 = parse_value(v)?,
            "p1" => s.p1 = parse_value(v)?,
            "viral_load_max" => s.viral_load_max = parse_value(v)?,
            "family_size_min" => s.family_size_min = parse_value(v)?,
            "family_size_max" => s.family_size_max = parse_value(v)?,
            "cross_rate" => s.cross_rate = parse_value(v)?,
            "sparsity_preset" => s.cross_rate = parse_preset(v)?.cross_rate(),
            "tau_family_min" => s.tau_family.lo = parse_value(v)?,
            "tau_family_max" => s.tau_family.hi = parse_value(v)?,
            "tau_cross_min" => s.tau_cross.lo = parse_value(v)?,
            "tau_cross_max" => s.tau_cross.hi = parse_value(v)?,
            "proximity_min" => s.proximity.lo = parse_value(v)?,
            "proximity_max" => s.proximity.hi = parse_value(v)?,
            "initial_infected" => s.initial_infected = parse_value(v)?,
            "pools" => r.pools = parse_value(v)?,
            "fp" => r.noise.fp = parse_value(v)?,
            "fn" => r.noise.fneg = parse_value(v)?,
            "test_period" => r.test_period = parse_value(v)?,
            "startup_period" => r.startup_period = parse_value(v)?,
            "first_test_day" => r.first_test_day = if v == "auto" { None } else { Some(parse_value(v)?) },
            "si_period" => r.si_period = parse_value(v)?,
            "p_excluded" => r.p_excluded = parse_value(v)?,
            "replacement_prior" => r.replacement_prior = parse_value(v)?,
            "threshold_step" => r.threshold_step = parse_value(v)?,
            "test_day" => self.test_day = parse_value(v)?,
            "t_max" => r.gamp.t_max = parse_value(v)?,
            "damping" => r.gamp.damping = parse_value(v)?,
            "delta_floor" => r.gamp.delta_floor = parse_value(v)?,
            "convergence_tol" => r.gamp.convergence_tol = parse_value(v)?,
            "one_over_n" => r.gamp.use_one_over_n_factor = parse_value(v)?,
            "denoiser" => self.denoiser = parse_value(v)?,
            "ct_epsilon" => self.ct.epsilon = parse_value(v)?,
            "ct_background" => self.ct.background = parse_value(v)?,
            "ct_initial_lambda" => self.ct.initial_lambda = parse_value(v)?,
            "ct_reestimate" => self.ct.reestimate = parse_reestimate(v)?,
            "ct_lambda_min" => self.ct.search.lo = parse_value(v)?,
            "ct_lambda_max" => self.ct.search.hi = parse_value(v)?,
            "ct_lambda_grid" => self.ct.search.grid = parse_value(v)?,
            "family_pi_vf" => self.family.initial.pi_vf = parse_value(v)?,
            "family_pi_ind" => self.family.initial.pi_ind = parse_value(v)?,
            "family_reestimate" => self.family.reestimate = parse_reestimate(v)?,
            "family_grid" => self.family.search.grid = parse_value(v)?,
            "family_refinements" => self.family.search.refinements = parse_value(v)?,
            "iid_prevalence" => self.iid_prevalence = parse_value(v)?,
            "replicates" => self.experiment.replicates = parse_value(v)?,
            "m_grid" => self.experiment.m_grid = parse_list(v)?,
            "p_excluded_grid" => self.experiment.p_excluded_grid = parse_list(v)?,
            "startup_grid" => self.experiment.startup_grid = parse_list(v)?,
            "denoisers" => self.experiment.denoisers = parse_list(v)?,
            "tuning_replicates" => self.experiment.tuning_replicates = parse_value(v)?,
            "dd_max_slack" => self.experiment.dd_max_slack = parse_value(v)?,
            "keep_roc" => self.experiment.keep_roc = parse_value(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Effective settings in canonical order. `sparsity_preset` is folded
    /// into `cross_rate`.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let s = &self.sim;
        let r = &self.regime;
        let e = &self.experiment;
        vec![
            ("seed", s.seed.to_string()),
            ("n", s.n.to_string()),
            ("days", s.days.to_string()),
            ("k1", s.k1.to_string()),
            ("k2", s.k2.to_string()),
            ("infection_period", s.infection_period.to_string()),
            ("lambda0", s.lambda0.to_string()),
            ("p1", s.p1.to_string()),
            ("viral_load_max", s.viral_load_max.to_string()),
            ("family_size_min", s.family_size_min.to_string()),
            ("family_size_max", s.family_size_max.to_string()),
            ("cross_rate", s.cross_rate.to_string()),
            ("tau_family_min", s.tau_family.lo.to_string()),
            ("tau_family_max", s.tau_family.hi.to_string()),
            ("tau_cross_min", s.tau_cross.lo.to_string()),
            ("tau_cross_max", s.tau_cross.hi.to_string()),
            ("proximity_min", s.proximity.lo.to_string()),
            ("proximity_max", s.proximity.hi.to_string()),
            ("initial_infected", s.initial_infected.to_string()),
            ("pools", r.pools.to_string()),
            ("fp", r.noise.fp.to_string()),
            ("fn", r.noise.fneg.to_string()),
            ("test_period", r.test_period.to_string()),
            ("startup_period", r.startup_period.to_string()),
            (
                "first_test_day",
                r.first_test_day.map_or_else(|| "auto".to_string(), |d| d.to_string()),
            ),
            ("si_period", r.si_period.to_string()),
            ("p_excluded", r.p_excluded.to_string()),
            ("replacement_prior", r.replacement_prior.to_string()),
            ("threshold_step", r.threshold_step.to_string()),
            ("test_day", self.test_day.to_string()),
            ("t_max", r.gamp.t_max.to_string()),
            ("damping", r.gamp.damping.to_string()),
            ("delta_floor", r.gamp.delta_floor.to_string()),
            ("convergence_tol", r.gamp.convergence_tol.to_string()),
            ("one_over_n", r.gamp.use_one_over_n_factor.to_string()),
            ("denoiser", self.denoiser.to_string()),
            ("ct_epsilon", self.ct.epsilon.to_string()),
            ("ct_background", self.ct.background.to_string()),
            ("ct_initial_lambda", self.ct.initial_lambda.to_string()),
            ("ct_reestimate", reestimate_str(self.ct.reestimate).to_string()),
            ("ct_lambda_min", self.ct.search.lo.to_string()),
            ("ct_lambda_max", self.ct.search.hi.to_string()),
            ("ct_lambda_grid", self.ct.search.grid.to_string()),
            ("family_pi_vf", self.family.initial.pi_vf.to_string()),
            ("family_pi_ind", self.family.initial.pi_ind.to_string()),
            ("family_reestimate", reestimate_str(self.family.reestimate).to_string()),
            ("family_grid", self.family.search.grid.to_string()),
            ("family_refinements", self.family.search.refinements.to_string()),
            ("iid_prevalence", self.iid_prevalence.to_string()),
            ("replicates", e.replicates.to_string()),
            ("m_grid", join(&e.m_grid)),
            ("p_excluded_grid", join(&e.p_excluded_grid)),
            ("startup_grid", join(&e.startup_grid)),
            ("denoisers", join(&e.denoisers)),
            ("tuning_replicates", e.tuning_replicates.to_string()),
            ("dd_max_slack", e.dd_max_slack.to_string()),
            ("keep_roc", e.keep_roc.to_string()),
        ]
    }

    /// Parse config text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut config = Config::default();
        let mut seen: Vec<(&str, usize)> = Vec::new();
        let schema = |line: usize, field: &str, msg: String| Error::Schema {
            path: origin.to_string(),
            line,
            field: field.to_string(),
            msg,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| schema(line, body, "expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
                return Err(schema(line, key, format!("repeated key (first set on line {first})")));
            }
            let known = KEYS.iter().find(|(k, _)| *k == key).map(|(k, _)| *k);
            let Some(known) = known else {
                return Err(schema(line, key, "unknown key".into()));
            };
            if (known == "cross_rate" && seen.iter().any(|(k, _)| *k == "sparsity_preset"))
                || (known == "sparsity_preset" && seen.iter().any(|(k, _)| *k == "cross_rate"))
            {
                return Err(schema(line, key, "cross_rate and sparsity_preset are exclusive".into()));
            }
            config.set(known, value).map_err(|msg| schema(line, key, msg))?;
            seen.push((known, line));
        }
        config.sync_denoiser();
        config.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{origin}: {msg}")),
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Canonical text: one `key = value` line per effective setting.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 over the effective settings sorted by key.
    pub fn digest(&self) -> String {
        let mut pairs = self.pairs();
        pairs.sort();
        let mut hasher = Sha256::new();
        for (k, v) in pairs {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn denoiser_choice(&self, kind: DenoiserKind) -> DenoiserChoice {
        match kind {
            DenoiserKind::Ct => DenoiserChoice::Ct(self.ct.clone()),
            DenoiserKind::Family => DenoiserChoice::Family(self.family.clone()),
            DenoiserKind::Iid => DenoiserChoice::Iid {
                prevalence: self.iid_prevalence,
            },
        }
    }

    fn sync_denoiser(&mut self) {
        self.regime.denoiser = self.denoiser_choice(self.denoiser);
    }

    /// Regime for one experiment cell.
    pub fn regime_with(&self, kind: DenoiserKind, pools: usize, seed: u64) -> RegimeConfig {
        RegimeConfig {
            denoiser: self.denoiser_choice(kind),
            pools,
            seed,
            ..self.regime.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        NoiseModel::new(self.regime.noise.fp, self.regime.noise.fneg)?;
        self.regime.validate_params()?;
        self.ct.validate()?;
        FamilyParams::new(self.family.initial.pi_vf, self.family.initial.pi_ind)?;
        if !(0.0..=1.0).contains(&self.iid_prevalence) {
            return Err(Error::Config("iid_prevalence must lie in [0, 1]".into()));
        }
        if self.test_day == 0 {
            return Err(Error::Config("test_day must be at least 1".into()));
        }
        let e = &self.experiment;
        if e.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if e.m_grid.is_empty() || e.denoisers.is_empty() {
            return Err(Error::Config("m_grid and denoisers must not be empty".into()));
        }
        Ok(())
    }
}
