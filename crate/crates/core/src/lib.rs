//! Quantum and classical chaos in the J=0 geometric collective model.

pub mod band;
pub mod classical;
pub mod density;
pub mod basis;
pub mod eigensolver;
pub mod error;
pub mod hamiltonian;
pub mod model;
pub mod pipeline;
pub mod special;
pub mod spectral_stats;
pub mod verner;

pub use error::{GcmError, Result};
