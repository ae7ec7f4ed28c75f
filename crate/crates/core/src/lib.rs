//! Tweet-augmented, time-encoded encoder-decoder traffic forecasting.
//!
//! The crate covers the full pipeline: tweet text features
//! ([`text`]), the traffic/tweet correlation study ([`stats`]), tensor
//! layout and time encoding ([`data`]), the attention model ([`model`]),
//! training and evaluation ([`train`]), and a seeded scenario generator
//! ([`synth`]) that stands in for proprietary sensor and social data.

pub mod data;
pub mod error;
pub mod io;
pub mod model;
pub mod numerics;
pub mod stats;
pub mod synth;
pub mod text;
pub mod time;
pub mod train;

pub use error::{Error, Result};
