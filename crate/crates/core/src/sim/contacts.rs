use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{ContactEvent, SimConfig, SimError};
use crate::denoise::FamilyStructure;
use crate::math;

/// Partition `0..n` into consecutive families with sizes drawn uniformly from
/// `[family_size_min, family_size_max]`. The last family is truncated to fit.
pub fn build_families<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<FamilyStructure, SimError> {
    if config.family_size_min == 0 || config.family_size_min > config.family_size_max {
        return Err(SimError::Config(format!(
            "bad family size range [{}, {}]",
            config.family_size_min, config.family_size_max
        )));
    }
    let mut members = Vec::new();
    let mut start = 0;
    while start < config.n {
        let size = rng.random_range(config.family_size_min..=config.family_size_max);
        let end = (start + size).min(config.n);
        members.push((start..end).collect::<Vec<_>>());
        start = end;
    }
    FamilyStructure::new(config.n, members).map_err(|e| SimError::Config(format!("{e}")))
}

/// Contacts of one day: a clique inside every family plus Bernoulli
/// cross-family pairs, sorted by `(i, j)`.
pub fn generate_contacts<R: Rng + ?Sized>(
    config: &SimConfig,
    families: &FamilyStructure,
    day: u32,
    rng: &mut R,
) -> Result<Vec<ContactEvent>, SimError> {
    if families.population() != config.n {
        return Err(SimError::Config(format!(
            "family structure covers {} individuals, config has n = {}",
            families.population(),
            config.n
        )));
    }
    if day >= config.days {
        return Err(SimError::Config(format!(
            "day {day} outside horizon 0..{}",
            config.days
        )));
    }
    if !(0.0..=1.0).contains(&config.cross_rate) {
        return Err(SimError::Config(format!(
            "cross_rate {} outside [0, 1]",
            config.cross_rate
        )));
    }

    let mut events = Vec::new();
    for fam in families.families() {
        for (a, &i) in fam.iter().enumerate() {
            for &j in &fam[a + 1..] {
                let (i, j) = if i < j { (i, j) } else { (j, i) };
                events.push(ContactEvent {
                    day,
                    i: i as u32,
                    j: j as u32,
                    tau: config.tau_family.sample(rng),
                    d: config.proximity.sample(rng),
                });
            }
        }
    }

    for_each_bernoulli_pair(config.n, config.cross_rate, rng, |i, j, rng| {
        if families.family_of(i) != families.family_of(j) {
            events.push(ContactEvent {
                day,
                i: i as u32,
                j: j as u32,
                tau: config.tau_cross.sample(rng),
                d: config.proximity.sample(rng),
            });
        }
    });

    events.sort_by_key(|e| (e.i, e.j));
    Ok(events)
}

/// Visit each pair `i < j` independently with probability `q`, using
/// geometric skips over the linearised upper triangle.
fn for_each_bernoulli_pair<R, F>(n: usize, q: f64, rng: &mut R, mut visit: F)
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize, &mut R),
{
    if q <= 0.0 || n < 2 {
        return;
    }
    let total = (n as u64) * (n as u64 - 1) / 2;
    let log_fail = math::ln_1p(-q);
    let mut row = 0usize;
    let mut row_start = 0u64;
    let mut row_len = (n - 1) as u64;
    let mut pos: u64 = 0;
    loop {
        if q < 1.0 {
            // 1 - u lies in (0, 1], so the log is finite.
            let u = 1.0 - rng.random::<f64>();
            let skip = libm::floor(math::ln(u) / log_fail);
            if skip >= (total - pos) as f64 {
                return;
            }
            pos += skip as u64;
        }
        if pos >= total {
            return;
        }
        while pos >= row_start + row_len {
            row_start += row_len;
            row += 1;
            row_len -= 1;
        }
        let j = row + 1 + (pos - row_start) as usize;
        visit(row, j, rng);
        pos += 1;
    }
}
