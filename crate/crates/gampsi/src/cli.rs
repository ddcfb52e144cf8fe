//! Command-line interface.
//!
//! Exit codes: 0 success, 2 configuration, 3 dimension, 4 numeric, 5 file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gampsi_core::regime::{decode_test, mask_startup_status, regime_measurements, DenoiserChoice};
use gampsi_core::sim::{simulate, SparsityLevel};
use gampsi_core::{CtSideInfo, SimOutput};

use crate::calibrate::{calibrate_cross_rate, CalibrationConfig};
use crate::config::{Config, DenoiserKind, KEYS};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{rerun, run_experiment, RunManifest, MANIFEST_FILE};
use crate::study::Study;

pub const CONTACTS_FILE: &str = "contacts.csv";
pub const STATUS_FILE: &str = "status.csv";
pub const FAMILIES_FILE: &str = "families.csv";
pub const MATRIX_FILE: &str = "matrix.txt";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";

#[derive(Debug, Parser)]
#[command(
    name = "gampsi",
    version,
    about = "Group testing with contact-tracing side information"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an epidemic and write contacts.csv, status.csv and families.csv.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the pooling matrix and measure one test day of a simulation.
    Pool {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory written by `simulate`.
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Test day; defaults to the config's `test_day`.
        #[arg(long)]
        day: Option<u32>,
    },
    /// Decode measurements with GAMP and write per-individual estimates.
    Decode(DecodeArgs),
    /// Run an experiment study, or rerun one from its manifest.
    Experiment {
        /// roc, weekly, p_excluded, si_period or baseline_compare.
        #[arg(long, required_unless_present = "rerun")]
        study: Option<String>,
        #[arg(long, conflicts_with = "rerun")]
        config: Option<PathBuf>,
        /// Manifest of a previous run.
        #[arg(long)]
        rerun: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find the cross-family contact rate matching each target sparsity.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target prevalence; defaults to the four shipped presets.
        #[arg(long)]
        target: Vec<f64>,
        /// Pilot seeds averaged per bisection step.
        #[arg(long, default_value_t = 400)]
        seeds: u64,
    },
    /// List the configuration keys.
    Keys,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub measurements: PathBuf,
    /// ct, family or iid.
    #[arg(long)]
    pub denoiser: String,
    /// Noise, GAMP and denoiser settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Contact log (ct).
    #[arg(long)]
    pub contacts: Option<PathBuf>,
    /// True daily statuses over the window (ct, first test).
    #[arg(long, conflicts_with = "previous")]
    pub status: Option<PathBuf>,
    /// Previous posterior estimates, held over the window (ct, later tests).
    #[arg(long)]
    pub previous: Option<PathBuf>,
    /// Side-information window `start:end`, inclusive days (ct).
    #[arg(long)]
    pub window: Option<String>,
    /// Family labels (family).
    #[arg(long)]
    pub families: Option<PathBuf>,
    /// Estimates CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace CSV; defaults to the estimates path with a `.trace.csv` suffix.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&load_config(config.as_deref())?, &out),
        Command::Pool { config, sim, out, day } => {
            let config = load_config(config.as_deref())?;
            cmd_pool(&config, &sim, &out, day.unwrap_or(config.test_day))
        }
        Command::Decode(args) => cmd_decode(&args),
        Command::Experiment {
            study,
            config,
            rerun: manifest,
            out,
        } => {
            let m = match manifest {
                Some(path) => {
                    let previous = RunManifest::load(&path)?;
                    let m = rerun(&previous, &out)?;
                    if m.result_digest() == previous.result_digest() {
                        log::info!("rerun reproduced result digest {}", m.result_digest());
                    } else {
                        log::warn!("rerun result digest differs from {}", path.display());
                    }
                    m
                }
                None => {
                    let study: Study = study.as_deref().unwrap_or_default().parse()?;
                    run_experiment(&load_config(config.as_deref())?, study, &out)?
                }
            };
            println!("{}", out.join(MANIFEST_FILE).display());
            println!("result digest {}", m.result_digest());
            Ok(())
        }
        Command::Calibrate { config, target, seeds } => {
            let config = load_config(config.as_deref())?;
            let targets: Vec<f64> = if target.is_empty() {
                SparsityLevel::ALL.iter().map(|l| l.target()).collect()
            } else {
                target
            };
            println!("target,cross_rate,prevalence");
            for t in targets {
                let cal = CalibrationConfig {
                    pilot_seeds: seeds,
                    ..CalibrationConfig::new(t)
                };
                let c = calibrate_cross_rate(&config.sim, &config.regime, &cal)?;
                println!("{t},{:e},{}", c.cross_rate, c.prevalence);
            }
            Ok(())
        }
        Command::Keys => {
            for (key, help) in KEYS {
                println!("{key:<20} {help}");
            }
            Ok(())
        }
    }
}

pub fn cmd_simulate(config: &Config, out: &Path) -> Result<()> {
    let sim = simulate(&config.sim)?;
    create_dir(out)?;
    io::write_contacts(&out.join(CONTACTS_FILE), &sim.contacts)?;
    io::write_status(&out.join(STATUS_FILE), &sim.states)?;
    io::write_families(&out.join(FAMILIES_FILE), &sim.families)?;
    Ok(())
}

/// Rebuild a simulation from the files `cmd_simulate` wrote.
pub fn load_simulation(config: &Config, dir: &Path) -> Result<SimOutput> {
    let states = io::read_status(&dir.join(STATUS_FILE))?;
    let mut contacts = io::read_contacts(&dir.join(CONTACTS_FILE))?;
    contacts.resize(states.len(), Vec::new());
    let families = io::read_families(&dir.join(FAMILIES_FILE))?;
    let n = states.first().map_or(0, |s| s.len());
    if families.population() != n {
        return Err(Error::Dimension(format!(
            "{} individuals in families, {n} in status",
            families.population()
        )));
    }
    let sim = gampsi_core::SimConfig {
        n,
        days: states.len() as u32,
        ..config.sim.clone()
    };
    Ok(SimOutput {
        config: sim,
        families,
        contacts,
        states,
    })
}

pub fn cmd_pool(config: &Config, sim_dir: &Path, out: &Path, day: u32) -> Result<()> {
    let sim = load_simulation(config, sim_dir)?;
    let regime = config.regime_with(config.denoiser, config.regime.pools, config.sim.seed);
    let (a, tests) = regime_measurements(&sim, &regime)?;
    let t = tests.iter().find(|t| t.day == day).ok_or_else(|| {
        let days: Vec<String> = tests.iter().map(|t| t.day.to_string()).collect();
        Error::Config(format!("day {day} is not a test day (test days: {})", days.join(", ")))
    })?;
    create_dir(out)?;
    io::write_matrix(&out.join(MATRIX_FILE), &a)?;
    io::write_measurements(&out.join(MEASUREMENTS_FILE), &t.y)?;
    Ok(())
}

fn parse_window(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Config(format!("--window expects start:end, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn require<'a>(v: &'a Option<PathBuf>, flag: &str, denoiser: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| Error::Config(format!("the {denoiser} denoiser requires {flag}")))
}

fn ct_side_info(args: &DecodeArgs, config: &Config, n: usize) -> Result<CtSideInfo> {
    let contacts_path = require(&args.contacts, "--contacts", "ct")?;
    if args.status.is_none() && args.previous.is_none() {
        return Err(Error::Config("the ct denoiser requires --status or --previous".into()));
    }
    let (start, end) = match &args.window {
        Some(w) => parse_window(w)?,
        None => {
            let day = config.test_day;
            let start = day
                .checked_sub(config.regime.startup_period)
                .filter(|_| day > 0)
                .ok_or_else(|| Error::Config("test_day precedes the startup window; pass --window".into()))?;
            (start, day - 1)
        }
    };
    let contacts: Vec<_> = io::read_contacts(contacts_path)?
        .into_iter()
        .enumerate()
        .filter(|(d, _)| (start as usize..=end as usize).contains(d))
        .flat_map(|(_, c)| c)
        .collect();
    let status: BTreeMap<u32, Vec<f64>> = if let Some(path) = &args.status {
        let states = io::read_status(path)?;
        let truth = (start..=end)
            .map(|d| {
                let s = states.get(d as usize).ok_or_else(|| {
                    Error::Dimension(format!(
                        "window day {d} is beyond the {} days in {}",
                        states.len(),
                        path.display()
                    ))
                })?;
                Ok((d, gampsi_core::sim::ground_truth_vector(s)))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        mask_startup_status(&truth, n, &config.regime)
    } else {
        let prev = io::read_estimates(args.previous.as_deref().expect("checked above"))?;
        (start..=end).map(|d| (d, prev.clone())).collect()
    };
    Ok(CtSideInfo::new(n, start, end, &contacts, &status)?)
}

pub fn cmd_decode(args: &DecodeArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let kind: DenoiserKind = args.denoiser.parse().map_err(Error::Config)?;
    let a = io::read_matrix(&args.matrix)?;
    let y = io::read_measurements(&args.measurements)?;
    if y.len() != a.m() {
        return Err(Error::Dimension(format!(
            "{} measurements for a matrix with {} pools",
            y.len(),
            a.m()
        )));
    }
    let choice: DenoiserChoice = config.denoiser_choice(kind);
    let (side_info, families) = match kind {
        DenoiserKind::Ct => (Some(ct_side_info(args, &config, a.n())?), None),
        DenoiserKind::Family => {
            let f = io::read_families(require(&args.families, "--families", "family")?)?;
            if f.population() != a.n() {
                return Err(Error::Dimension(format!(
                    "{} individuals in families, {} matrix columns",
                    f.population(),
                    a.n()
                )));
            }
            (None, Some(f))
        }
        DenoiserKind::Iid => (None, None),
    };
    let (out, _) = decode_test(
        &a,
        &y,
        &config.regime.noise,
        &config.regime.gamp,
        &choice,
        families.as_ref(),
        side_info,
    )?;
    if !out.converged {
        log::warn!(
            "GAMP stopped at t_max = {} without meeting the tolerance",
            config.regime.gamp.t_max
        );
    }
    io::write_estimates(&args.out, &out.xhat)?;
    let trace = args.trace.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".trace.csv");
        PathBuf::from(p)
    });
    io::write_trace(&trace, &out.trace)?;
    Ok(())
}
