use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::Ablation;
use crate::params::AdamConfig;

/// The five generator configurations compared in an ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Full,
    NoDesc,
    NoTypes,
    NoDescTypes,
    Monolingual,
}

impl SystemKind {
    pub const ALL: [SystemKind; 5] = [
        SystemKind::Full,
        SystemKind::NoDescTypes,
        SystemKind::NoDesc,
        SystemKind::NoTypes,
        SystemKind::Monolingual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Full => "full",
            SystemKind::NoDesc => "no-desc",
            SystemKind::NoTypes => "no-types",
            SystemKind::NoDescTypes => "no-desc-types",
            SystemKind::Monolingual => "monolingual",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown system {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub use_desc: bool,
    pub use_types: bool,
    /// Fuse only the query article (the target's, when it exists).
    pub monolingual: bool,
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_desc: usize,
    pub desc_layers: usize,
    pub desc_heads: usize,
    pub d_type: usize,
    pub max_positions: usize,
    pub max_output_tokens: usize,
    /// Maximum number of corpus tokens in the vocabulary.
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            use_desc: true,
            use_types: true,
            monolingual: false,
            d_model: 64,
            layers: 2,
            heads: 4,
            d_desc: 32,
            desc_layers: 1,
            desc_heads: 2,
            d_type: 16,
            max_positions: 64,
            max_output_tokens: 16,
            vocab_size: 8000,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn for_system(kind: SystemKind) -> Self {
        let mut c = ModelConfig::default();
        match kind {
            SystemKind::Full => {}
            SystemKind::NoDesc => c.use_desc = false,
            SystemKind::NoTypes => c.use_types = false,
            SystemKind::NoDescTypes => {
                c.use_desc = false;
                c.use_types = false;
            }
            SystemKind::Monolingual => {
                c.use_desc = false;
                c.use_types = false;
                c.monolingual = true;
            }
        }
        c
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            use_desc: self.use_desc,
            use_types: self.use_types,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.max_output_tokens >= 1, "max_output_tokens must be at least 1"),
            (self.max_output_tokens < self.max_positions, "max_output_tokens must be below max_positions"),
            (self.d_model % self.heads == 0, "d_model must be divisible by heads"),
            (self.d_desc % self.desc_heads == 0, "d_desc must be divisible by desc_heads"),
            (self.layers >= 1 && self.desc_layers >= 1, "at least one layer per stack"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Validation(msg.into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Cap on (entity, language) pairs scored for the per-epoch validation loss.
    pub max_valid_instances: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            optimizer: AdamConfig::default(),
            max_valid_instances: 200,
        }
    }
}
