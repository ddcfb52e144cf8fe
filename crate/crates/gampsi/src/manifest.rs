//! Run manifests: enough to reconstruct an experiment and check its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::study::{aggregate, plan, run_study, write_aggregate, write_run, Study};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    /// Canonical config text; parsing it reproduces the run.
    pub config: String,
    pub study: Study,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<OutputFile>,
    pub stage_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn config(&self) -> Result<Config> {
        let config = Config::parse(&self.config, "manifest")?;
        if config.digest() != self.config_digest {
            return Err(Error::Config("manifest config does not match its digest".into()));
        }
        Ok(config)
    }

    /// Digest over every output digest, in manifest order.
    pub fn result_digest(&self) -> String {
        let mut h = Sha256::new();
        for o in &self.outputs {
            h.update(o.path.as_bytes());
            h.update([0]);
            h.update(o.sha256.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }

    /// Check that every listed output exists with the recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for o in &self.outputs {
            let found = file_sha256(&dir.join(&o.path))?;
            if found != o.sha256 {
                return Err(Error::format(
                    dir.join(&o.path),
                    "content differs from the manifest digest",
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("gampsi".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("gampsi-core".to_string(), gampsi_core::VERSION.to_string()),
    ])
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Run `study`, write per-run JSON, the aggregate table, the config and the
/// manifest under `out`.
pub fn run_experiment(config: &Config, study: Study, out: &Path) -> Result<RunManifest> {
    let runs_dir = out.join(RUNS_DIR);
    create_dir(&runs_dir)?;
    let mut stage_seconds = BTreeMap::new();

    let start = Instant::now();
    let runs = run_study(config, study)?;
    stage_seconds.insert("run".to_string(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    let mut paths: Vec<PathBuf> = Vec::new();
    for run in &runs {
        paths.push(Path::new(RUNS_DIR).join(write_run(&runs_dir, run)?));
    }
    write_aggregate(&out.join(AGGREGATE_FILE), &aggregate(&runs))?;
    paths.push(PathBuf::from(AGGREGATE_FILE));
    let config_path = out.join(CONFIG_FILE);
    std::fs::write(&config_path, config.to_text()).map_err(|e| Error::io(&config_path, e))?;
    paths.push(PathBuf::from(CONFIG_FILE));
    stage_seconds.insert("write".to_string(), start.elapsed().as_secs_f64());

    let outputs = paths
        .iter()
        .map(|p| {
            Ok(OutputFile {
                path: p.to_string_lossy().replace('\\', "/"),
                sha256: file_sha256(&out.join(p))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut seeds: Vec<u64> = plan(config, study).iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = RunManifest {
        config_digest: config.digest(),
        config: config.to_text(),
        study,
        seeds,
        versions: versions(),
        outputs,
        stage_seconds,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Re-run the experiment recorded in `manifest` into `out`.
pub fn rerun(manifest: &RunManifest, out: &Path) -> Result<RunManifest> {
    run_experiment(&manifest.config()?, manifest.study, out)
}
