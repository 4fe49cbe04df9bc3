//! File formats, configuration, manifests and the command pipeline around
//! [`synthmarket_core`].
//!
//! The binary `synthmarket` exposes the commands in [`commands`]; everything
//! here is also usable as a library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod schema;

pub use commands::Context;
pub use config::PipelineConfig;
pub use error::{CliError, Result};
