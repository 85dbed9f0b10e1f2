//! Flat-key JSON configuration for the `fit` pipeline. Command-line flags
//! override config values; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub edges: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed_blog: Option<String>,
    pub depth: Option<usize>,
    pub damping: Option<f64>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub terms: Option<String>,
    pub baseline: Option<String>,
    pub symmetrize: Option<bool>,
    pub zscore: Option<bool>,
    pub threads: Option<usize>,
    pub locale_comma: Option<bool>,
    pub allow_unconverged: Option<bool>,
    pub formats: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
    }
}
