use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::numerics::AdamConfig;

/// Where question embeddings for template-bank initialisation come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingSource {
    /// A seeded random vector per token.
    Internal,
    /// A word2vec-style text file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub convergence_eps: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub embedding_source: EmbeddingSource,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub freeze_templates: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            convergence_eps: 1e-6,
            max_epochs: 30,
            batch_size: 1,
            seed: 13,
            embedding_source: EmbeddingSource::Internal,
            kmeans_restarts: 5,
            kmeans_max_iter: 100,
            freeze_templates: false,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 10] = [
        "lr",
        "convergence_eps",
        "max_epochs",
        "batch_size",
        "seed",
        "embedding_source",
        "embedding_file",
        "kmeans_restarts",
        "kmeans_max_iter",
        "freeze_templates",
    ];

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(Error::Config(format!("convergence_eps must be positive, got {}", self.convergence_eps)));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 {
            return Err(Error::Config("max_epochs, batch_size, kmeans_restarts and kmeans_max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }

    /// Applies one `key = value` entry; `false` for keys owned elsewhere.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let parse = |v: &str| -> Result<f64> { v.trim().parse().map_err(|_| Error::Config(format!("`{key}` has an unparsable value `{v}`"))) };
        let parse_usize = |v: &str| -> Result<usize> { v.trim().parse().map_err(|_| Error::Config(format!("`{key}` has an unparsable value `{v}`"))) };
        match key {
            "lr" => self.lr = parse(value)?,
            "convergence_eps" => self.convergence_eps = parse(value)?,
            "max_epochs" => self.max_epochs = parse_usize(value)?,
            "batch_size" => self.batch_size = parse_usize(value)?,
            "seed" => self.seed = value.trim().parse().map_err(|_| Error::Config(format!("`seed` has an unparsable value `{value}`")))?,
            "kmeans_restarts" => self.kmeans_restarts = parse_usize(value)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse_usize(value)?,
            "freeze_templates" => {
                self.freeze_templates = value.trim().parse().map_err(|_| Error::Config(format!("`freeze_templates` must be true|false, got `{value}`")))?
            }
            "embedding_source" => match value.trim() {
                "internal" => self.embedding_source = EmbeddingSource::Internal,
                // The path arrives separately as `embedding_file`.
                "file" => {
                    if !matches!(self.embedding_source, EmbeddingSource::File(_)) {
                        self.embedding_source = EmbeddingSource::File(PathBuf::new());
                    }
                }
                other => return Err(Error::Config(format!("embedding_source must be internal|file, got `{other}`"))),
            },
            "embedding_file" => self.embedding_source = EmbeddingSource::File(PathBuf::from(value.trim())),
            _ => return Ok(false),
        }
        Ok(true)
    }
}
