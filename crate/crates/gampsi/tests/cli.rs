use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gampsi::cli::{
    cmd_decode, cmd_pool, cmd_simulate, DecodeArgs, CONTACTS_FILE, FAMILIES_FILE, MATRIX_FILE, MEASUREMENTS_FILE,
    STATUS_FILE,
};
use gampsi::config::{Config, DenoiserKind};
use gampsi::io;
use gampsi::manifest::{rerun, run_experiment, RunManifest, AGGREGATE_FILE, MANIFEST_FILE};
use gampsi::study::{RunResult, Study};
use gampsi::Error;
use gampsi_core::metrics::{roc_sweep, select_operating_point, threshold_grid};
use gampsi_core::regime::run_weekly_regime;
use gampsi_core::sim::simulate;
use gampsi_core::PoolingMatrix;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gampsi"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

fn decode_args(dir: &Path, denoiser: &str) -> DecodeArgs {
    DecodeArgs {
        matrix: dir.join(MATRIX_FILE),
        measurements: dir.join(MEASUREMENTS_FILE),
        denoiser: denoiser.into(),
        config: None,
        contacts: None,
        status: None,
        previous: None,
        window: None,
        families: None,
        out: dir.join("estimates.csv"),
        trace: None,
    }
}

const SMALL: &str = "n = 300\ndays = 16\npools = 120\ncross_rate = 0.004\nthreshold_step = 0.01\n";

#[test]
fn simulate_minimal_config_writes_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n = 4\ndays = 1\ninitial_infected = 1\nfamily_size_min = 1\nfamily_size_max = 2\n",
    );
    let out = dir.path().join("sim");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(first_line(&out.join(CONTACTS_FILE)), "day,i,j,tau,d");
    assert_eq!(first_line(&out.join(STATUS_FILE)), "day,individual,status,viral_load");
    assert_eq!(first_line(&out.join(FAMILIES_FILE)), "individual,family_id");
    assert_eq!(io::read_status(&out.join(STATUS_FILE)).unwrap().len(), 1);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = Config::parse(SMALL, "small").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_simulate(&config, &a).unwrap();
    cmd_simulate(&config, &b).unwrap();
    for f in [CONTACTS_FILE, STATUS_FILE, FAMILIES_FILE] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn simulate_full_population_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let config = Config::parse("n = 1000\ndays = 30\n", "budget").unwrap();
    let start = Instant::now();
    cmd_simulate(&config, dir.path()).unwrap();
    let t = start.elapsed().as_secs_f64();
    assert!(t < 10.0, "simulate took {t:.2} s");
}

#[test]
fn decode_identity_with_clean_outcomes_returns_them() {
    let dir = tempfile::tempdir().unwrap();
    let n = 50;
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 7 == 0)).collect();
    io::write_matrix(&dir.path().join(MATRIX_FILE), &PoolingMatrix::identity(n)).unwrap();
    io::write_measurements(&dir.path().join(MEASUREMENTS_FILE), &y).unwrap();
    let args = decode_args(dir.path(), "iid");
    cmd_decode(&args).unwrap();
    let xhat = io::read_estimates(&args.out).unwrap();
    let est: Vec<u8> = xhat.iter().map(|&x| u8::from(x >= 0.5)).collect();
    assert_eq!(est, y);
    assert!(dir.path().join("estimates.csv.trace.csv").exists());
}

#[test]
fn decode_ct_without_contacts_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    io::write_matrix(&dir.path().join(MATRIX_FILE), &PoolingMatrix::identity(3)).unwrap();
    io::write_measurements(&dir.path().join(MEASUREMENTS_FILE), &[0, 1, 0]).unwrap();
    let err = cmd_decode(&decode_args(dir.path(), "ct")).unwrap_err();
    assert!(err.to_string().contains("--contacts"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let out = bin()
        .arg("decode")
        .arg("--matrix")
        .arg(dir.path().join(MATRIX_FILE))
        .arg("--measurements")
        .arg(dir.path().join(MEASUREMENTS_FILE))
        .args(["--denoiser", "ct", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--contacts"));
}

#[test]
fn decode_reports_dimension_mismatch_with_its_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    io::write_matrix(&dir.path().join(MATRIX_FILE), &PoolingMatrix::identity(3)).unwrap();
    io::write_measurements(&dir.path().join(MEASUREMENTS_FILE), &[0, 1]).unwrap();
    let err = cmd_decode(&decode_args(dir.path(), "iid")).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn decode_rejects_unknown_denoiser() {
    let dir = tempfile::tempdir().unwrap();
    io::write_matrix(&dir.path().join(MATRIX_FILE), &PoolingMatrix::identity(3)).unwrap();
    io::write_measurements(&dir.path().join(MEASUREMENTS_FILE), &[0, 1, 0]).unwrap();
    let err = cmd_decode(&decode_args(dir.path(), "lasso")).unwrap_err();
    assert!(err.to_string().contains("lasso"));
}

#[test]
fn file_pipeline_matches_in_process_regime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), SMALL);
    let config = Config::load(&cfg_path).unwrap();
    let sim_dir = dir.path().join("sim");
    cmd_simulate(&config, &sim_dir).unwrap();
    cmd_pool(&config, &sim_dir, dir.path(), config.test_day).unwrap();

    for kind in [DenoiserKind::Ct, DenoiserKind::Family, DenoiserKind::Iid] {
        let mut args = decode_args(dir.path(), kind.as_str());
        args.config = Some(cfg_path.clone());
        args.contacts = Some(sim_dir.join(CONTACTS_FILE));
        args.status = Some(sim_dir.join(STATUS_FILE));
        args.families = Some(sim_dir.join(FAMILIES_FILE));
        cmd_decode(&args).unwrap();
        let xhat = io::read_estimates(&args.out).unwrap();

        let sim = simulate(&config.sim).unwrap();
        let regime = config.regime_with(kind, config.regime.pools, config.sim.seed);
        let first = run_weekly_regime(&sim, &regime).unwrap().tests.remove(0);
        assert_eq!(first.day, config.test_day);
        assert_eq!(xhat, first.xhat, "{kind}");

        let truth = io::read_status(&sim_dir.join(STATUS_FILE)).unwrap()[first.day as usize - 1]
            .individuals
            .iter()
            .map(|s| u8::from(s.status.is_positive()))
            .collect::<Vec<_>>();
        let roc = roc_sweep(&xhat, &truth, &threshold_grid(config.regime.threshold_step));
        let op = select_operating_point(&roc).unwrap();
        assert_eq!(op.confusion, first.metrics.confusion, "{kind}");
        assert_eq!(op.threshold, first.metrics.threshold, "{kind}");
    }
}

#[test]
fn pool_rejects_non_test_day() {
    let dir = tempfile::tempdir().unwrap();
    let config = Config::parse(SMALL, "small").unwrap();
    cmd_simulate(&config, dir.path()).unwrap();
    let err = cmd_pool(&config, dir.path(), dir.path(), 9).unwrap_err();
    assert!(err.to_string().contains("test days: 8, 15"), "{err}");
}

/// `SMALL` plus a two-replicate experiment, with `extra` lines overriding.
fn tiny_experiment(extra: &str) -> Config {
    let mut config = Config::parse(&format!("{SMALL}replicates = 2\nm_grid = 90,120\n"), "tiny").unwrap();
    for line in extra.lines() {
        let (k, v) = line.split_once('=').unwrap();
        config.set(k.trim(), v.trim()).unwrap();
    }
    config.validate().unwrap();
    config
}

#[test]
fn roc_study_writes_monotone_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_experiment(&tiny_experiment("denoisers = ct\n"), Study::Roc, dir.path()).unwrap();
    let runs: Vec<&str> = manifest
        .outputs
        .iter()
        .map(|o| o.path.as_str())
        .filter(|p| p.starts_with("runs/"))
        .collect();
    assert_eq!(runs.len(), 4);
    for p in runs {
        let run: RunResult = io::read_json(&dir.path().join(p)).unwrap();
        for t in &run.tests {
            let roc = t.roc.as_ref().expect("roc arrays kept");
            assert!(roc.threshold.windows(2).all(|w| w[0] < w[1]));
            assert!(roc.fpr.windows(2).all(|w| w[0] >= w[1]), "{p}");
            let fnr: Vec<f64> = roc.fnr.iter().flatten().copied().collect();
            assert!(fnr.windows(2).all(|w| w[0] <= w[1]), "{p}");
        }
    }
}

#[test]
fn p_excluded_extremes_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_experiment("p_excluded_grid = 0,1\nreplicates = 4\n");
    run_experiment(&config, Study::PExcluded, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["condition", "m", "sparsity", "fpr", "fnr", "threshold", "success"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    let total = |row: &csv::StringRecord| row[3].parse::<f64>().unwrap() + row[4].parse::<f64>().unwrap_or(0.0);
    assert!(total(&rows[0]) < total(&rows[1]), "{text}");
}

#[test]
fn rerun_from_manifest_reproduces_digests() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let config = tiny_experiment("denoisers = ct,family\nm_grid = 120\n");
    let first = run_experiment(&config, Study::Roc, &a).unwrap();
    first.verify(&a).unwrap();
    let loaded = RunManifest::load(&a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded.outputs, first.outputs);
    let second = rerun(&loaded, &b).unwrap();
    assert_eq!(second.result_digest(), first.result_digest());
    assert_eq!(second.outputs, first.outputs);
    assert_eq!(second.config_digest, config.digest());
}

#[test]
fn experiment_binary_rejects_unknown_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["experiment", "--study", "lotto", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lotto"));
}

#[test]
fn schema_errors_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 10\n\npools = many\n");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("pools"), "{err}");
}
