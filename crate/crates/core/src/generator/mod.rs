//! The description generator: configuration, model, training and decoding.

mod config;
mod decode;
mod model;
mod train;

pub use config::{ModelConfig, SystemKind, TrainConfig};
pub use decode::{decode, filter_truncated, DecodeStrategy, Decoded, StepScorer, TruncationFilter};
pub use model::{DescriptionModel, GenerationRecord, GenerationResult};
pub use train::{fit, train, validation_loss, EpochLog, TrainingLog};
