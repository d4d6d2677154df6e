//! Transformer-encoder GAN for multi-channel time series.
//!
//! - [`tape`]: dense tensors with reverse-mode differentiation
//! - [`transformer`]: patch tokenization and the pre-norm encoder
//! - [`gan`]: generator and discriminator
//! - [`training`]: least-squares adversarial training with Adam, [`checkpoint`] persistence
//! - [`data`]: sinusoid simulation, CSV ingestion, preprocessing, batching
//! - [`evaluation`]: feature-based similarity scores and PCA projection

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gan;
pub mod gradcheck;
pub mod nn;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod training;
pub mod transformer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::RunConfig;
pub use data::{SequenceBatch, Source};
pub use error::{CheckpointError, Error, Result};
pub use evaluation::{FeatureMatrix, SimilarityReport};
pub use gan::{Discriminator, GanConfig, Generator};
pub use params::ModelParams;
pub use tape::{Mode, Tape, Var};
pub use tensor::Tensor;
pub use training::{LabelMode, LossHistory, TrainConfig, Trainer};
pub use transformer::{EncoderConfig, PatchSpec};

/// Written into every run directory.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
