use serde::{Deserialize, Serialize};

use crate::data::CALENDAR_DIM;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_model_default")]
    pub d_model: usize,
    #[serde(default = "heads_default")]
    pub heads: usize,
    #[serde(default = "layers_default")]
    pub encoder_layers: usize,
    #[serde(default = "layers_default")]
    pub decoder_layers: usize,
    /// 0 means `4 · d_model`.
    #[serde(default)]
    pub ff_dim: usize,
    #[serde(default = "twelve")]
    pub input_len: usize,
    #[serde(default = "twelve")]
    pub horizon: usize,
    /// Filled from the dataset when 0.
    #[serde(default)]
    pub segments: usize,
    /// Per-segment input channels; filled from the dataset when 0.
    #[serde(default)]
    pub features: usize,
    /// Calendar features and the learned projection; without it the
    /// sinusoids are simply added to the embedding.
    #[serde(default = "yes")]
    pub time_encoder: bool,
    #[serde(default)]
    pub seed: u64,
    /// Decoder tokens enter as (tps - token_mean) / token_std. Not trained;
    /// `train` sets them from the dataset's TPS statistics.
    #[serde(default)]
    pub token_mean: f64,
    #[serde(default = "unit")]
    pub token_std: f64,
}

fn d_model_default() -> usize {
    64
}
fn heads_default() -> usize {
    8
}
fn layers_default() -> usize {
    2
}
fn twelve() -> usize {
    12
}
fn yes() -> bool {
    true
}
fn unit() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 8,
            encoder_layers: 2,
            decoder_layers: 2,
            ff_dim: 0,
            input_len: 12,
            horizon: 12,
            segments: 0,
            features: 0,
            time_encoder: true,
            seed: 0,
            token_mean: 0.0,
            token_std: 1.0,
        }
    }
}

impl ModelConfig {
    /// Small configuration used by the toy checks.
    pub fn toy(segments: usize, features: usize) -> Self {
        Self {
            d_model: 16,
            heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            ff_dim: 32,
            segments,
            features,
            ..Self::default()
        }
    }

    pub fn ff(&self) -> usize {
        if self.ff_dim == 0 {
            4 * self.d_model
        } else {
            self.ff_dim
        }
    }

    pub fn d_k(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn input_width(&self) -> usize {
        self.segments * self.features
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.heads == 0 {
            return bad("d_model and heads must be positive".into());
        }
        if self.d_model % self.heads != 0 {
            return bad(format!("d_model {} is not divisible by heads {}", self.d_model, self.heads));
        }
        if self.d_model % 2 != 0 {
            return bad(format!("d_model {} must be even for the sinusoids", self.d_model));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("need at least one encoder and one decoder layer".into());
        }
        if self.input_len == 0 || self.horizon == 0 {
            return bad("input_len and horizon must be positive".into());
        }
        if self.segments == 0 || self.features == 0 {
            return bad("segments and features must be set".into());
        }
        if !self.token_mean.is_finite() || !(self.token_std.is_finite() && self.token_std > 0.0) {
            return bad(format!("token scaling {} / {} is invalid", self.token_mean, self.token_std));
        }
        Ok(())
    }

    /// Closed-form number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        let (d, f, m) = (self.d_model, self.ff(), self.segments);
        let ff_block = d * f + f + f * d + d;
        let norm = 2 * d;
        let attn = 4 * d * d;
        let embed = self.input_width() * d + d + m * d + d;
        let time = if self.time_encoder { d * (2 * d + CALENDAR_DIM) } else { 0 };
        let enc = self.encoder_layers * (attn + norm + ff_block + norm);
        let dec = self.decoder_layers * (2 * attn + 3 * norm + ff_block);
        let head = d * m + m;
        embed + time + enc + dec + head
    }
}
