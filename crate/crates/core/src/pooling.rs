//! Binary pooling matrices and the noisy test channel.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoolingError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("entry ({row}, {col}) outside a {m}x{n} matrix")]
    OutOfBounds { row: usize, col: usize, m: usize, n: usize },
    #[error("row {0} has no entries")]
    EmptyRow(usize),
    #[error("column {0} has no entries")]
    EmptyColumn(usize),
    #[error("no weight-3 design with pairwise overlap <= 1 for n = {n}, m = {m}")]
    Infeasible { n: usize, m: usize },
    #[error("noise probabilities must lie in [0, 0.5): fp = {fp}, fn = {fneg}")]
    Noise { fp: f64, fneg: f64 },
}

/// Sparse `m x n` binary matrix with row and column adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingMatrix {
    m: usize,
    n: usize,
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
}

impl PoolingMatrix {
    /// Build from `(row, col)` pairs. Duplicates collapse; every row and
    /// column must end up with at least one entry.
    pub fn from_entries(
        m: usize,
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, PoolingError> {
        let mut rows = vec![Vec::new(); m];
        let mut cols = vec![Vec::new(); n];
        for (r, c) in entries {
            if r >= m || c >= n {
                return Err(PoolingError::OutOfBounds { row: r, col: c, m, n });
            }
            rows[r].push(c as u32);
            cols[c].push(r as u32);
        }
        for list in rows.iter_mut().chain(cols.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        if let Some(r) = rows.iter().position(Vec::is_empty) {
            return Err(PoolingError::EmptyRow(r));
        }
        if let Some(c) = cols.iter().position(Vec::is_empty) {
            return Err(PoolingError::EmptyColumn(c));
        }
        Ok(Self { m, n, rows, cols })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_entries(n, n, (0..n).map(|i| (i, i))).expect("identity is well formed")
    }

    /// Number of pools.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of individuals.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Individuals in pool `j`.
    pub fn row(&self, j: usize) -> &[u32] {
        &self.rows[j]
    }

    /// Pools containing individual `i`.
    pub fn col(&self, i: usize) -> &[u32] {
        &self.cols[i]
    }

    pub fn row_weights(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn col_weights(&self) -> Vec<usize> {
        self.cols.iter().map(Vec::len).collect()
    }

    /// Entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c as usize)))
    }

    /// `A x` for a real vector of length `n`.
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&c| x[c as usize]).sum();
        }
    }

    /// `Aᵀ z` for a real vector of length `m`.
    pub fn mul_t(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.m);
        for (o, col) in out.iter_mut().zip(&self.cols) {
            *o = col.iter().map(|&r| z[r as usize]).sum();
        }
    }

    /// Exact integer pool loads `w = A x`.
    pub fn noiseless_pool(&self, x: &[u8]) -> Result<Vec<u32>, PoolingError> {
        if x.len() != self.n {
            return Err(PoolingError::Dimension(alloc::format!(
                "x has length {}, matrix has {} columns",
                x.len(),
                self.n
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&c| x[c as usize] as u32).sum())
            .collect())
    }
}

/// Binary test errors: `fp = Pr(y=1 | w=0)`, `fneg = Pr(y=0 | w>0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    pub fp: f64,
    pub fneg: f64,
}

impl NoiseModel {
    /// RT-PCR style asymmetric errors used for the n = 1000 studies.
    pub const ASYMMETRIC: NoiseModel = NoiseModel { fp: 0.001, fneg: 0.02 };
    /// Symmetric 1% errors used for the n = 500 studies.
    pub const SYMMETRIC: NoiseModel = NoiseModel { fp: 0.01, fneg: 0.01 };
    pub const NOISELESS: NoiseModel = NoiseModel { fp: 0.0, fneg: 0.0 };

    pub fn new(fp: f64, fneg: f64) -> Result<Self, PoolingError> {
        if !(0.0..0.5).contains(&fp) || !(0.0..0.5).contains(&fneg) {
            return Err(PoolingError::Noise { fp, fneg });
        }
        Ok(Self { fp, fneg })
    }

    /// `Pr(y | pool positive)` and `Pr(y | pool negative)`.
    pub fn likelihoods(&self, y: bool) -> (f64, f64) {
        if y {
            (1.0 - self.fneg, self.fp)
        } else {
            (self.fneg, 1.0 - self.fp)
        }
    }
}

/// Draw noisy test outcomes for health vector `x`.
pub fn measure<R: Rng + ?Sized>(
    a: &PoolingMatrix,
    x: &[u8],
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<u8>, PoolingError> {
    let w = a.noiseless_pool(x)?;
    Ok(w.iter()
        .map(|&load| {
            let u = rng.random::<f64>();
            let positive = if load > 0 { u >= noise.fneg } else { u < noise.fp };
            u8::from(positive)
        })
        .collect())
}

/// Largest number of columns a weight-3, overlap-1 design on `m` rows can hold.
pub fn triple_capacity(m: usize) -> usize {
    m * m.saturating_sub(1) / 6
}

/// Constant column weight 3 with any two columns sharing at most one row.
///
/// Columns are placed greedily: rows are ranked by current weight with random
/// tie-breaks and the first admissible triple in that ranking is taken. A
/// final pass moves entries from the heaviest to the lightest rows until row
/// weights differ by at most one, if the overlap constraint allows. When
/// placement or balancing gets stuck the construction restarts, and the
/// best-balanced complete design is kept.
pub fn build_triple_design<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<PoolingMatrix, PoolingError> {
    if m < 3 || n == 0 || n > triple_capacity(m) || 3 * n < m {
        return Err(PoolingError::Infeasible { n, m });
    }
    let mut best: Option<(u32, Vec<[usize; 3]>)> = None;
    for _ in 0..ATTEMPTS {
        let Some((triples, spread)) = place_triples(n, m, rng) else {
            continue;
        };
        if best.as_ref().map_or(true, |(s, _)| spread < *s) {
            best = Some((spread, triples));
        }
        if spread <= 1 {
            break;
        }
    }
    let (spread, triples) = best.ok_or(PoolingError::Infeasible { n, m })?;
    if spread > 1 {
        log::warn!("triple design row weights differ by {spread}");
    }
    let entries = triples
        .iter()
        .enumerate()
        .flat_map(|(col, t)| t.iter().map(move |&r| (r, col)));
    PoolingMatrix::from_entries(m, n, entries)
}

/// Independent greedy constructions tried before giving up on balance or
/// on placing every column.
const ATTEMPTS: usize = 16;

/// One greedy construction followed by rebalancing; returns the triples and
/// the final row-weight spread.
fn place_triples<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Option<(Vec<[usize; 3]>, u32)> {
    let mut used = PairSet::new(m);
    let mut weight = vec![0u32; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut triples: Vec<[usize; 3]> = Vec::with_capacity(n);
    for _ in 0..n {
        order.shuffle(rng);
        order.sort_by_key(|&r| weight[r]);
        let triple = first_admissible(&order, &used)?;
        for (k, &r) in triple.iter().enumerate() {
            weight[r] += 1;
            for &s in &triple[k + 1..] {
                used.insert(r, s);
            }
        }
        triples.push(triple);
    }
    let spread = rebalance(&mut triples, &mut weight, &mut used);
    Some((triples, spread))
}

/// Move entries from the heaviest rows to the lightest ones while the
/// overlap constraint allows, until row weights differ by at most one.
/// Returns the remaining spread.
fn rebalance(triples: &mut [[usize; 3]], weight: &mut [u32], used: &mut PairSet) -> u32 {
    loop {
        let lo = *weight.iter().min().expect("m >= 3");
        let hi = *weight.iter().max().expect("m >= 3");
        if hi - lo <= 1 {
            return hi - lo;
        }
        let mut moved = false;
        'search: for t in triples.iter_mut() {
            for k in 0..3 {
                if weight[t[k]] != hi {
                    continue;
                }
                let (b, c) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                for light in (0..weight.len()).filter(|&r| weight[r] == lo) {
                    if light == b || light == c || used.contains(light, b) || used.contains(light, c) {
                        continue;
                    }
                    used.remove(t[k], b);
                    used.remove(t[k], c);
                    used.insert(light, b);
                    used.insert(light, c);
                    weight[t[k]] -= 1;
                    weight[light] += 1;
                    t[k] = light;
                    moved = true;
                    break 'search;
                }
            }
        }
        if !moved {
            return hi - lo;
        }
    }
}

fn first_admissible(order: &[usize], used: &PairSet) -> Option<[usize; 3]> {
    let m = order.len();
    for ai in 0..m {
        let a = order[ai];
        for bi in ai + 1..m {
            let b = order[bi];
            if used.contains(a, b) {
                continue;
            }
            for &c in &order[bi + 1..] {
                if !used.contains(a, c) && !used.contains(b, c) {
                    return Some([a, b, c]);
                }
            }
        }
    }
    None
}

/// Symmetric bitset over row pairs.
struct PairSet {
    m: usize,
    bits: Vec<u64>,
}

impl PairSet {
    fn new(m: usize) -> Self {
        Self {
            m,
            bits: vec![0; (m * m).div_ceil(64)],
        }
    }

    fn insert(&mut self, a: usize, b: usize) {
        for idx in [a * self.m + b, b * self.m + a] {
            self.bits[idx / 64] |= 1 << (idx % 64);
        }
    }

    fn remove(&mut self, a: usize, b: usize) {
        for idx in [a * self.m + b, b * self.m + a] {
            self.bits[idx / 64] &= !(1 << (idx % 64));
        }
    }

    fn contains(&self, a: usize, b: usize) -> bool {
        let idx = a * self.m + b;
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }
}
