//! Analytic and simulation core for distributed quantum sensing over noisy
//! quantum networks.
//!
//! The crate is `no_std` (with `alloc`). It contains:
//!
//! * [`metrology`]: quantum Fisher information of GHZ-diagonal probes,
//!   advantage factors, fidelity thresholds and local-measurement optimization.
//! * [`bell_algebra`]: closed-form maps on Bell-diagonal states (memory
//!   decoherence, noisy swapping, noisy recurrence purification).
//! * [`densmat`]: a small dense density-matrix kernel used for GHZ assembly
//!   and as a brute-force oracle for the closed forms.
//! * [`estimation`]: hybrid estimators and inverse-variance combining.
//! * [`netsim`]: a seeded discrete-event repeater-network simulator that
//!   distributes Bell pairs and assembles a GHZ probe.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub(crate) mod math;

pub mod bell_algebra;
pub mod densmat;
pub mod estimation;
pub mod metrology;
pub mod netsim;

pub use error::{Error, Result};
