//! One-dimensional wave-optics simulator for pseudothermal and computational
//! ghost imaging.
//!
//! * [`optics`]: sampled planes, fields and Fresnel propagators.
//! * [`sources`]: pseudothermal realizations and the replayable C-source sequence.
//! * [`correlation`]: exact two-arm correlation, Klyshko PSF, ensemble estimators.
//! * [`photon`]: photon-level Monte Carlo (coincidence pairs, single-photon CGI).
//! * [`recon`]: run configuration, object ingestion and experiment orchestration.

pub mod correlation;
pub mod error;
pub mod optics;
pub mod photon;
pub mod recon;
pub mod rng;
pub mod sources;
pub mod summation;

pub use error::{GhostError, Result};
