use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{log_likelihood_ratio, Reestimate};
use crate::gamp::Denoiser;
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FamilyError {
    #[error("individual {0} is assigned to more than one family")]
    Overlap(usize),
    #[error("individual {0} belongs to no family")]
    Uncovered(usize),
    #[error("family {0} is empty")]
    Empty(usize),
    #[error("individual {index} outside population of {n}")]
    OutOfRange { index: usize, n: usize },
    #[error("family parameters must lie in (0, 1): pi_vf = {pi_vf}, pi_ind = {pi_ind}")]
    Params { pi_vf: f64, pi_ind: f64 },
    #[error("invalid search bounds: {0}")]
    Bounds(String),
}

/// Partition of the population into families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyStructure {
    members: Vec<Vec<usize>>,
    family_of: Vec<usize>,
}

impl FamilyStructure {
    pub fn new(n: usize, members: Vec<Vec<usize>>) -> Result<Self, FamilyError> {
        const UNSET: usize = usize::MAX;
        let mut family_of = vec![UNSET; n];
        for (f, fam) in members.iter().enumerate() {
            if fam.is_empty() {
                return Err(FamilyError::Empty(f));
            }
            for &i in fam {
                if i >= n {
                    return Err(FamilyError::OutOfRange { index: i, n });
                }
                if family_of[i] != UNSET {
                    return Err(FamilyError::Overlap(i));
                }
                family_of[i] = f;
            }
        }
        if let Some(i) = family_of.iter().position(|&f| f == UNSET) {
            return Err(FamilyError::Uncovered(i));
        }
        Ok(Self { members, family_of })
    }

    /// Build from one family label per individual. Families are numbered in
    /// order of first appearance.
    pub fn from_labels(labels: &[u64]) -> Self {
        let mut index: BTreeMap<u64, usize> = BTreeMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let family_of = labels
            .iter()
            .enumerate()
            .map(|(i, label)| {
                let f = *index.entry(*label).or_insert_with(|| {
                    members.push(Vec::new());
                    members.len() - 1
                });
                members[f].push(i);
                f
            })
            .collect();
        Self { members, family_of }
    }

    /// Every individual in its own family.
    pub fn singletons(n: usize) -> Self {
        Self {
            members: (0..n).map(|i| vec![i]).collect(),
            family_of: (0..n).collect(),
        }
    }

    pub fn families(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn family_of(&self, i: usize) -> usize {
        self.family_of[i]
    }

    pub fn population(&self) -> usize {
        self.family_of.len()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyParams {
    /// `Pr(family viral)`.
    pub pi_vf: f64,
    /// `Pr(member infected | family viral)`.
    pub pi_ind: f64,
}

impl FamilyParams {
    pub fn new(pi_vf: f64, pi_ind: f64) -> Result<Self, FamilyError> {
        let ok = |p: f64| p > 0.0 && p < 1.0;
        if !ok(pi_vf) || !ok(pi_ind) {
            return Err(FamilyError::Params { pi_vf, pi_ind });
        }
        Ok(Self { pi_vf, pi_ind })
    }

    /// Marginal infection probability of one member.
    pub fn marginal(&self) -> f64 {
        self.pi_vf * self.pi_ind
    }
}

/// Per-member sufficient terms: `ln f(v|0)` and the log-likelihood ratio.
#[inline]
fn member_terms(v: f64, delta: f64) -> (f64, f64) {
    (math::ln_normal_pdf(v, 0.0, delta), log_likelihood_ratio(v, delta))
}

/// `ln Pr(F viral | v_F) − ln Pr(F not viral | v_F)` from the factorised
/// sum over infection patterns.
fn viral_log_odds(llr: impl Iterator<Item = f64>, params: &FamilyParams) -> f64 {
    let ln_ind = math::ln(params.pi_ind);
    let ln_not = math::ln_1p(-params.pi_ind);
    let mix: f64 = llr.map(|l| math::log_add_exp(ln_ind + l, ln_not)).sum();
    math::logit(params.pi_vf) + mix
}

/// `Pr(F viral | v_F)`.
pub fn family_viral_posterior(v: &[f64], delta: &[f64], params: &FamilyParams) -> f64 {
    let llr = v.iter().zip(delta).map(|(&v, &d)| log_likelihood_ratio(v, d));
    math::logistic(viral_log_odds(llr, params))
}

/// Posterior means and variances for the members of one family.
///
/// `xhat_i = Pr(F viral | v_F) · Pr(X_i = 1 | v_i, F viral)`.
pub fn family_denoise(v: &[f64], delta: &[f64], params: &FamilyParams, xhat: &mut [f64], s: &mut [f64]) {
    let viral = family_viral_posterior(v, delta, params);
    let prior_logit = math::logit(params.pi_ind);
    for i in 0..v.len() {
        let member = math::logistic(prior_logit + log_likelihood_ratio(v[i], delta[i]));
        let x = viral * member;
        xhat[i] = x;
        s[i] = x * (1.0 - x);
    }
}

/// `Σ_F ln f(v_F)` under the two-level family model.
pub fn family_log_likelihood(v: &[f64], delta: &[f64], structure: &FamilyStructure, params: &FamilyParams) -> f64 {
    let ln_not_viral = math::ln_1p(-params.pi_vf);
    structure
        .families()
        .iter()
        .map(|fam| {
            let mut base = 0.0;
            let odds = viral_log_odds(
                fam.iter().map(|&i| {
                    let (l0, llr) = member_terms(v[i], delta[i]);
                    base += l0;
                    llr
                }),
                params,
            );
            // ln[(1−π_vf)·Πf0 + π_vf·Π mix] = ln(1−π_vf) + Σ ln f0 + ln(1 + e^odds)
            base + ln_not_viral + math::log_add_exp(0.0, odds)
        })
        .sum()
}

/// Bounds and resolution of the plug-in grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilySearch {
    pub pi_vf: (f64, f64),
    pub pi_ind: (f64, f64),
    pub grid: usize,
    /// Zoom levels applied around the best grid cell.
    pub refinements: usize,
}

impl Default for FamilySearch {
    fn default() -> Self {
        Self {
            pi_vf: (0.001, 0.999),
            pi_ind: (0.001, 0.999),
            grid: 41,
            refinements: 3,
        }
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || lo == hi {
        return vec![lo];
    }
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Maximum-likelihood `(pi_vf, pi_ind)` from pseudo data by a 2-D grid search
/// with local zooming. The result is never worse than the best grid point.
pub fn plugin_estimate_family_params(
    v: &[f64],
    delta: &[f64],
    structure: &FamilyStructure,
    search: &FamilySearch,
) -> Result<FamilyParams, FamilyError> {
    for (name, (lo, hi)) in [("pi_vf", search.pi_vf), ("pi_ind", search.pi_ind)] {
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return Err(FamilyError::Bounds(alloc::format!("{name} bounds ({lo}, {hi})")));
        }
    }
    let eval = |a: f64, b: f64| family_log_likelihood(v, delta, structure, &FamilyParams { pi_vf: a, pi_ind: b });

    let mut grid_a = linspace(search.pi_vf.0, search.pi_vf.1, search.grid);
    let mut grid_b = linspace(search.pi_ind.0, search.pi_ind.1, search.grid);
    let mut best = (grid_a[0], grid_b[0], f64::NEG_INFINITY);
    let mut worst = f64::INFINITY;
    for &a in &grid_a {
        for &b in &grid_b {
            let ll = eval(a, b);
            worst = worst.min(ll);
            if ll > best.2 {
                best = (a, b, ll);
            }
        }
    }
    if best.2 - worst < 1e-9 {
        log::warn!("flat family likelihood; returning first grid maximiser");
        return Ok(FamilyParams {
            pi_vf: best.0,
            pi_ind: best.1,
        });
    }

    for _ in 0..search.refinements {
        let step_a = if grid_a.len() > 1 { grid_a[1] - grid_a[0] } else { 0.0 };
        let step_b = if grid_b.len() > 1 { grid_b[1] - grid_b[0] } else { 0.0 };
        let (ca, cb) = (best.0, best.1);
        grid_a = linspace((ca - step_a).max(search.pi_vf.0), (ca + step_a).min(search.pi_vf.1), 11);
        grid_b = linspace(
            (cb - step_b).max(search.pi_ind.0),
            (cb + step_b).min(search.pi_ind.1),
            11,
        );
        for &a in &grid_a {
            for &b in &grid_b {
                let ll = eval(a, b);
                if ll > best.2 {
                    best = (a, b, ll);
                }
            }
        }
    }
    Ok(FamilyParams {
        pi_vf: best.0,
        pi_ind: best.1,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyConfig {
    /// Parameters used before (or instead of) the plug-in fit.
    pub initial: FamilyParams,
    pub search: FamilySearch,
    pub reestimate: Reestimate,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            initial: FamilyParams {
                pi_vf: 0.05,
                pi_ind: 0.5,
            },
            search: FamilySearch::default(),
            reestimate: Reestimate::Once,
        }
    }
}

/// Vector denoiser over families.
#[derive(Debug, Clone)]
pub struct FamilyDenoiser {
    structure: FamilyStructure,
    params: FamilyParams,
    config: FamilyConfig,
    fitted: bool,
    scratch: (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>),
}

impl FamilyDenoiser {
    pub fn new(structure: FamilyStructure, config: FamilyConfig) -> Self {
        Self {
            structure,
            params: config.initial,
            config,
            fitted: false,
            scratch: Default::default(),
        }
    }

    pub fn params(&self) -> FamilyParams {
        self.params
    }

    pub fn structure(&self) -> &FamilyStructure {
        &self.structure
    }
}

impl Denoiser for FamilyDenoiser {
    fn prior_mean(&self) -> Vec<f64> {
        vec![self.params.marginal(); self.structure.population()]
    }

    fn denoise(&mut self, v: &[f64], delta: &[f64], xhat: &mut [f64], s: &mut [f64]) {
        let refit = match self.config.reestimate {
            Reestimate::Never => false,
            Reestimate::Once => !self.fitted,
            Reestimate::EveryIteration => true,
        };
        if refit {
            match plugin_estimate_family_params(v, delta, &self.structure, &self.config.search) {
                Ok(p) => self.params = p,
                Err(e) => log::warn!("family plug-in fit failed: {e}"),
            }
            self.fitted = true;
        }
        let (fv, fd, fx, fs) = &mut self.scratch;
        for fam in self.structure.families() {
            fv.clear();
            fd.clear();
            fv.extend(fam.iter().map(|&i| v[i]));
            fd.extend(fam.iter().map(|&i| delta[i]));
            fx.resize(fam.len(), 0.0);
            fs.resize(fam.len(), 0.0);
            family_denoise(fv, fd, &self.params, fx, fs);
            for (k, &i) in fam.iter().enumerate() {
                xhat[i] = fx[k];
                s[i] = fs[k];
            }
        }
    }
}
