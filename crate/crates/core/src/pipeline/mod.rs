//! Config-driven experiment runs with CSV outputs, a spectrum cache and a JSON manifest.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{Run, RunManifest};
pub use config::RunConfig;
