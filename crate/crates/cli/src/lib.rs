//! Library surface of the pipeline CLI: run configuration, the artifact
//! manifest, and the subcommand implementations. The binary in `main.rs`
//! is a thin clap wrapper over these.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::ValidationError;
pub use config::RunConfig;
pub use manifest::{RunManifest, MANIFEST_FILE};
