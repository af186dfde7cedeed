use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{DEFAULT_DIMENSION, DEFAULT_SEED};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationMode {
    /// Timestamps when every turn carries both, otherwise the word proxy.
    #[default]
    Auto,
    Timestamps,
    Words,
}

/// Tunables for the structural and PE metric computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub length_scale: f64,
    /// Upper edges of all but the last flow-entropy bin (inclusive).
    pub entropy_bin_edges: Vec<f64>,
    pub embedder_seed: u64,
    pub embedder_dimension: usize,
    pub duration_mode: DurationMode,
    /// Words per normalized duration unit when timestamps are unavailable.
    pub words_per_duration_unit: f64,
    /// Client-turn emotion intensity above which the turn counts as engaged.
    pub engagement_threshold: f64,
    pub lm_order: usize,
    pub lm_alpha: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            length_scale: 10_000.0,
            entropy_bin_edges: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            embedder_seed: DEFAULT_SEED,
            embedder_dimension: DEFAULT_DIMENSION,
            duration_mode: DurationMode::Auto,
            words_per_duration_unit: 100.0,
            engagement_threshold: 0.05,
            lm_order: 3,
            lm_alpha: 1.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.length_scale > 0.0) {
            return bad("length_scale must be positive");
        }
        if self.entropy_bin_edges.is_empty()
            || self.entropy_bin_edges.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("entropy_bin_edges must be non-empty and strictly increasing");
        }
        if self.embedder_dimension == 0 {
            return bad("embedder_dimension must be positive");
        }
        if !(self.words_per_duration_unit > 0.0) {
            return bad("words_per_duration_unit must be positive");
        }
        if self.lm_order == 0 || !(self.lm_alpha > 0.0) {
            return bad("lm_order must be >= 1 and lm_alpha positive");
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        self.entropy_bin_edges.len() + 1
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: MetricConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
