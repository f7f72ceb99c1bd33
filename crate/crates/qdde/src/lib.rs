//! Scenario files, CSV/markdown artefacts and circuit text for `qdde-core`.

pub mod circuit_text;
pub mod commands;
pub mod error;
pub mod numfmt;
pub mod scenario;

pub use error::{CliError, Result};
pub use scenario::Scenario;
