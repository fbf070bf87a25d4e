//! File-based pipeline: configuration plus one command per stage.

pub mod commands;
pub mod config;

pub use commands::{cluster, encode, evaluate, extract, generate, plot, train};
pub use config::{ClusterSpace, PipelineConfig};

use std::path::Path;

use crate::error::Result;

/// Loads the configuration (defaults when `path` is `None`), then applies `--set` overrides
/// and the `--seed` override in that order.
pub fn load_config(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}
