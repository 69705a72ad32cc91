//! File formats, configuration, the HTTP agent backend and the staged
//! command pipeline around `edsmf-core`.

pub mod backend;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod formats;
pub mod manifest;
pub mod pipeline;

pub use config::{ConfigError, RunConfig};
pub use pipeline::{Pipeline, StageError};
