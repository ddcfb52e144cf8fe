use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use super::{ContactEvent, IndividualState, PopulationState, SimConfig, Status};
use crate::math;

/// Probability that a contact of `tau` hours at proximity `d` with an
/// infectious node of viral load `viral_load` transmits the infection.
#[inline]
pub fn transmission_probability(viral_load: f64, tau: f64, d: f64, lambda0: f64) -> f64 {
    -math::exp_m1(-lambda0 * viral_load * d * tau)
}

/// Status implied by the days elapsed since infection.
pub(crate) fn status_at(config: &SimConfig, infection_day: u32, day: u32) -> Status {
    let offset = day - infection_day;
    if offset >= config.infection_period {
        Status::Recovered
    } else if offset >= config.k1 && offset <= config.k2 {
        Status::Infectious
    } else {
        Status::Infected
    }
}

fn infect<R: Rng + ?Sized>(config: &SimConfig, day: u32, rng: &mut R) -> IndividualState {
    let viral_load = 1.0 + (config.viral_load_max - 1.0) * rng.random::<f64>();
    IndividualState {
        status: Status::Infected,
        infection_day: Some(day),
        viral_load,
    }
}

/// Day-0 population with `initial_infected` individuals infected that day.
pub(crate) fn seed_population<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> PopulationState {
    let mut state = PopulationState::susceptible(config.n, 0);
    let mut chosen = sample(rng, config.n, config.initial_infected).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        state.individuals[i] = infect(config, 0, rng);
    }
    state
}

/// Move every infected individual to the status it has on `day`.
fn advance(state: &mut PopulationState, config: &SimConfig, day: u32) {
    state.day = day;
    for ind in &mut state.individuals {
        if let Some(t0) = ind.infection_day {
            if ind.status == Status::Recovered {
                continue;
            }
            ind.status = status_at(config, t0, day);
            if ind.status == Status::Recovered {
                ind.viral_load = 0.0;
            }
        }
    }
}

/// Apply one day of transmissions in place. Infectiousness is read from the
/// state before any new infection of the day, so chains never extend more
/// than one hop per day.
pub(crate) fn transmit<R: Rng + ?Sized>(
    state: &mut PopulationState,
    contacts: &[ContactEvent],
    config: &SimConfig,
    rng: &mut R,
) {
    let day = state.day;
    // Accumulated Poisson exposure; survival probability is exp(-exposure).
    let mut exposure = vec![0.0f64; state.len()];
    let inds = &state.individuals;
    for c in contacts {
        debug_assert_eq!(c.day, day, "contacts must belong to the current day");
        let (i, j) = (c.i as usize, c.j as usize);
        let (si, sj) = (inds[i].status, inds[j].status);
        if si == Status::Infectious && sj == Status::Susceptible {
            exposure[j] += config.lambda0 * inds[i].viral_load * c.d * c.tau;
        } else if sj == Status::Infectious && si == Status::Susceptible {
            exposure[i] += config.lambda0 * inds[j].viral_load * c.d * c.tau;
        }
    }

    let stray_survival = math::ln_1p(-config.p1);
    let mut newly: Vec<usize> = Vec::new();
    for (idx, ind) in state.individuals.iter().enumerate() {
        if ind.status != Status::Susceptible {
            continue;
        }
        // Stray and contact infections are independent: P = 1 - (1-p1)·exp(-E).
        let p = -math::exp_m1(stray_survival - exposure[idx]);
        if rng.random::<f64>() < p {
            newly.push(idx);
        }
    }
    for idx in newly {
        state.individuals[idx] = infect(config, day, rng);
    }
}

/// Advance the population by one day using that day's contacts.
pub fn step_day<R: Rng + ?Sized>(
    state: &PopulationState,
    contacts: &[ContactEvent],
    config: &SimConfig,
    rng: &mut R,
) -> PopulationState {
    let mut next = state.clone();
    advance(&mut next, config, state.day + 1);
    transmit(&mut next, contacts, config, rng);
    next
}

/// Binary health vector: 1 for infected or infectious, 0 otherwise.
pub fn ground_truth_vector(state: &PopulationState) -> Vec<u8> {
    state
        .individuals
        .iter()
        .map(|s| u8::from(s.status.is_positive()))
        .collect()
}
