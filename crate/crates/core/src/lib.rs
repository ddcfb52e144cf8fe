//! Nonadaptive group testing with side information.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every computational
//! piece of the pipeline:
//!
//! - [`sim`]: a daily contact graph over families plus cross-family contacts,
//!   driving a susceptible / infected / infectious / recovered state machine.
//! - [`pooling`]: binary pooling matrices (constant column weight three with
//!   pairwise overlap at most one) and the noisy binary test channel.
//! - [`gamp`]: generalized approximate message passing with the binary-test
//!   output channel and a pluggable input denoiser.
//! - [`denoise`]: family and contact-tracing denoisers, the contact-tracing
//!   prior and plug-in maximum-likelihood parameter estimation.
//! - [`baselines`]: noisy column matching and noisy definite defectives.
//! - [`metrics`] and [`regime`]: ROC sweeps, operating points and the weekly
//!   testing regime that chains posteriors into the next week's priors.
//!
//! File formats, configuration files and the command line live in the
//! companion `gampsi` crate.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod denoise;
pub mod gamp;
pub mod math;
pub mod metrics;
pub mod pooling;
pub mod regime;
pub mod rng;
pub mod sim;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use denoise::{CtDenoiser, CtSideInfo, FamilyDenoiser, FamilyParams, FamilyStructure, IidDenoiser};
pub use gamp::{gamp_run, Denoiser, GampConfig, GampError, GampOutput, GampState};
pub use metrics::{Confusion, Metrics, RocPoint};
pub use pooling::{NoiseModel, PoolingMatrix};
pub use sim::{ContactEvent, IndividualState, PopulationState, SimConfig, SimOutput, Status};
