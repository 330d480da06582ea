//! Photon-number difference statistics for weak-field homodyne detection.
//!
//! A heralded, Fock-like signal is mixed with a weak coherent state on a
//! balanced beam splitter and both outputs are counted with
//! photon-number-resolving detectors. This crate evaluates the exact
//! difference statistics ([`quantum`]), the classical-field approximation
//! ([`classical`]), phase-space and photon-number representations of the
//! signal ([`states`]), and the calibration, nonclassicality and
//! transition-analysis pipelines built on top of them.

pub mod analysis;
pub mod calibration;
pub mod classical;
mod error;
pub mod ingest;
pub mod nonclassicality;
pub mod numerics;
pub mod quantum;
pub mod states;

pub use error::{Error, Result};
pub use numerics::{DiffDist, JointPhotonDist, PhotonDist, TruncationPolicy};
pub use quantum::{DetectorParams, ExperimentParams, SourceParams};
