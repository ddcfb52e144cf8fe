//! File formats.
//!
//! | file | columns |
//! |------|---------|
//! | contacts | `day,i,j,tau,d` |
//! | status | `day,individual,status,viral_load` |
//! | families | `individual,family_id` |
//! | matrix | header `m n nnz`, then `row col` per line, 0-indexed |
//! | measurements | `pool,y` |
//! | priors | `individual,prior` |
//! | estimates | `individual,xhat` |
//! | trace | `iter,mean_abs_change,mean_delta` |
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use gampsi_core::gamp::TraceRow;
use gampsi_core::sim::{ContactEvent, IndividualState, PopulationState, Status};
use gampsi_core::{FamilyStructure, PoolingMatrix};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header-only file for empty tables, so readers still see the columns.
fn write_header(path: &Path, header: &str) -> Result<()> {
    std::fs::write(path, format!("{header}\n")).map_err(|e| Error::io(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let found = r.headers().map_err(|e| Error::format(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            path,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    r.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::format(path, format!("row {}: {e}", k + 2))))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ContactRow {
    day: u32,
    i: u32,
    j: u32,
    tau: f64,
    d: f64,
}

pub fn write_contacts(path: &Path, contacts: &[Vec<ContactEvent>]) -> Result<()> {
    if contacts.iter().all(Vec::is_empty) {
        return write_header(path, "day,i,j,tau,d");
    }
    write_rows(
        path,
        contacts.iter().flatten().map(|c| ContactRow {
            day: c.day,
            i: c.i,
            j: c.j,
            tau: c.tau,
            d: c.d,
        }),
    )
}

/// Contacts grouped by day; days without contacts up to the last listed day
/// get empty lists.
pub fn read_contacts(path: &Path) -> Result<Vec<Vec<ContactEvent>>> {
    let rows: Vec<ContactRow> = read_rows(path, &["day", "i", "j", "tau", "d"])?;
    let days = rows.iter().map(|r| r.day as usize + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); days];
    for r in rows {
        out[r.day as usize].push(ContactEvent {
            day: r.day,
            i: r.i,
            j: r.j,
            tau: r.tau,
            d: r.d,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct StatusRow {
    day: u32,
    individual: usize,
    status: String,
    viral_load: f64,
}

pub fn write_status(path: &Path, states: &[PopulationState]) -> Result<()> {
    write_rows(
        path,
        states.iter().flat_map(|s| {
            s.individuals.iter().enumerate().map(move |(i, ind)| StatusRow {
                day: s.day,
                individual: i,
                status: ind.status.as_str().to_string(),
                viral_load: ind.viral_load,
            })
        }),
    )
}

/// Daily states. Days must be consecutive from 0 and list every individual;
/// infection days are recovered as the first day an individual is not
/// susceptible.
pub fn read_status(path: &Path) -> Result<Vec<PopulationState>> {
    let rows: Vec<StatusRow> = read_rows(path, &["day", "individual", "status", "viral_load"])?;
    let days = rows.iter().map(|r| r.day as usize + 1).max().unwrap_or(0);
    let n = rows.iter().map(|r| r.individual + 1).max().unwrap_or(0);
    let mut filled = vec![vec![false; n]; days];
    let mut states: Vec<PopulationState> = (0..days).map(|d| PopulationState::susceptible(n, d as u32)).collect();
    for (k, r) in rows.iter().enumerate() {
        let status = Status::parse(&r.status)
            .ok_or_else(|| Error::format(path, format!("row {}: unknown status `{}`", k + 2, r.status)))?;
        let (d, i) = (r.day as usize, r.individual);
        if filled[d][i] {
            return Err(Error::format(
                path,
                format!("row {}: duplicate entry for day {d}, individual {i}", k + 2),
            ));
        }
        filled[d][i] = true;
        states[d].individuals[i] = IndividualState {
            status,
            infection_day: None,
            viral_load: r.viral_load,
        };
    }
    if let Some((d, i)) = filled
        .iter()
        .enumerate()
        .find_map(|(d, row)| row.iter().position(|f| !f).map(|i| (d, i)))
    {
        return Err(Error::format(path, format!("no entry for day {d}, individual {i}")));
    }
    for i in 0..n {
        let first = (0..days).find(|&d| states[d].individuals[i].status != Status::Susceptible);
        if let Some(t0) = first {
            for s in &mut states[t0..] {
                s.individuals[i].infection_day = Some(t0 as u32);
            }
        }
    }
    Ok(states)
}

#[derive(Serialize, Deserialize)]
struct FamilyRow {
    individual: usize,
    family_id: u64,
}

pub fn write_families(path: &Path, families: &FamilyStructure) -> Result<()> {
    write_rows(
        path,
        (0..families.population()).map(|i| FamilyRow {
            individual: i,
            family_id: families.family_of(i) as u64,
        }),
    )
}

pub fn read_families(path: &Path) -> Result<FamilyStructure> {
    let rows: Vec<FamilyRow> = read_rows(path, &["individual", "family_id"])?;
    let mut labels = vec![None; rows.len()];
    for r in &rows {
        let slot = labels
            .get_mut(r.individual)
            .ok_or_else(|| Error::format(path, format!("individual {} out of range", r.individual)))?;
        if slot.replace(r.family_id).is_some() {
            return Err(Error::format(path, format!("individual {} listed twice", r.individual)));
        }
    }
    let labels: Vec<u64> = labels.into_iter().map(|l| l.expect("every slot filled")).collect();
    Ok(FamilyStructure::from_labels(&labels))
}

pub fn write_matrix(path: &Path, a: &PoolingMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {} {}", a.m(), a.n(), a.nnz()).map_err(io)?;
    for (r, c) in a.entries() {
        writeln!(w, "{r} {c}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_matrix(path: &Path) -> Result<PoolingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_pair = |line: &str, lineno: usize, count: usize| -> Result<Vec<usize>> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != count {
            return Err(Error::format(path, format!("line {lineno}: expected {count} integers")));
        }
        fields
            .iter()
            .map(|f| {
                f.parse()
                    .map_err(|e| Error::format(path, format!("line {lineno}: {e}")))
            })
            .collect()
    };
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty matrix file"))?
        .map_err(|e| Error::io(path, e))?;
    let h = parse_pair(&header, 1, 3)?;
    let (m, n, nnz) = (h[0], h[1], h[2]);
    let mut entries = Vec::with_capacity(nnz);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p = parse_pair(&line, k + 2, 2)?;
        entries.push((p[0], p[1]));
    }
    if entries.len() != nnz {
        return Err(Error::Dimension(format!(
            "{}: header declares {nnz} entries, found {}",
            path.display(),
            entries.len()
        )));
    }
    let a = PoolingMatrix::from_entries(m, n, entries)?;
    if a.nnz() != nnz {
        return Err(Error::format(path, "duplicate entries"));
    }
    Ok(a)
}

#[derive(Serialize, Deserialize)]
struct MeasurementRow {
    pool: usize,
    y: u8,
}

pub fn write_measurements(path: &Path, y: &[u8]) -> Result<()> {
    write_rows(path, y.iter().enumerate().map(|(pool, &y)| MeasurementRow { pool, y }))
}

pub fn read_measurements(path: &Path) -> Result<Vec<u8>> {
    let rows: Vec<MeasurementRow> = read_rows(path, &["pool", "y"])?;
    indexed(path, rows.into_iter().map(|r| (r.pool, r.y)), |y| {
        if y <= 1 {
            Ok(y)
        } else {
            Err(format!("outcome {y} is not 0 or 1"))
        }
    })
}

/// Collect `(index, value)` rows into a dense vector; indices must be a
/// permutation of `0..len`.
fn indexed<T: Copy, U>(
    path: &Path,
    rows: impl Iterator<Item = (usize, T)>,
    check: impl Fn(T) -> Result<U, String>,
) -> Result<Vec<U>> {
    let rows: Vec<(usize, T)> = rows.collect();
    let mut out: Vec<Option<U>> = (0..rows.len()).map(|_| None).collect();
    for (idx, v) in rows {
        let slot = out
            .get_mut(idx)
            .ok_or_else(|| Error::format(path, format!("index {idx} out of range")))?;
        if slot.is_some() {
            return Err(Error::format(path, format!("index {idx} listed twice")));
        }
        *slot = Some(check(v).map_err(|m| Error::format(path, format!("index {idx}: {m}")))?);
    }
    Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
}

#[derive(Serialize, Deserialize)]
struct PriorRow {
    individual: usize,
    prior: f64,
}

pub fn write_priors(path: &Path, priors: &[f64]) -> Result<()> {
    write_rows(
        path,
        priors
            .iter()
            .enumerate()
            .map(|(individual, &prior)| PriorRow { individual, prior }),
    )
}

pub fn read_priors(path: &Path) -> Result<Vec<f64>> {
    let rows: Vec<PriorRow> = read_rows(path, &["individual", "prior"])?;
    indexed(path, rows.into_iter().map(|r| (r.individual, r.prior)), probability)
}

#[derive(Serialize, Deserialize)]
struct EstimateRow {
    individual: usize,
    xhat: f64,
}

pub fn write_estimates(path: &Path, xhat: &[f64]) -> Result<()> {
    write_rows(
        path,
        xhat.iter()
            .enumerate()
            .map(|(individual, &xhat)| EstimateRow { individual, xhat }),
    )
}

/// Binary estimates use the same file with 0/1 values.
pub fn write_binary_estimates(path: &Path, est: &[bool]) -> Result<()> {
    write_rows(
        path,
        est.iter().enumerate().map(|(individual, &e)| EstimateRow {
            individual,
            xhat: f64::from(u8::from(e)),
        }),
    )
}

pub fn read_estimates(path: &Path) -> Result<Vec<f64>> {
    let rows: Vec<EstimateRow> = read_rows(path, &["individual", "xhat"])?;
    indexed(path, rows.into_iter().map(|r| (r.individual, r.xhat)), probability)
}

fn probability(p: f64) -> Result<f64, String> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("probability {p} outside [0, 1]"))
    }
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    if trace.is_empty() {
        return write_header(path, "iter,mean_abs_change,mean_delta");
    }
    write_rows(path, trace.iter())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(path, &["iter", "mean_abs_change", "mean_delta"])
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(path, e))
}
