//! Encoder-decoder attention forecaster with a learned time encoder.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod transformer;

pub use attention::{attention_weights, multi_head, scaled_dot_attention, AttentionParams};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use transformer::{ForecastModel, ParamSpec};
