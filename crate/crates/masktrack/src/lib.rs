//! File formats, run configuration and the command-line front end around
//! `masktrack-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod imageio;
pub mod render;
pub mod results;
pub mod runs;

pub use config::RunConfig;
pub use error::{Error, Result};
