//! Retraining with one tweet channel or the time encoder removed.

use serde::{Deserialize, Serialize};

use super::forecaster::Forecaster;
use super::fit::{evaluate, train, EpochRecord, TrainConfig};
use super::metrics::MetricsReport;
use crate::data::{Channel, Dataset, Layout, SplitSpec, TrafficTensor, TweetFeatureTensor, WindowSpec};
use crate::error::{Error, Result};
use crate::model::{ForecastModel, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    DropCulture,
    DropTermFrequency,
    DropAccident,
    DropTimeEncoder,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 5] = [
        AblationVariant::Full,
        AblationVariant::DropCulture,
        AblationVariant::DropTermFrequency,
        AblationVariant::DropAccident,
        AblationVariant::DropTimeEncoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::DropCulture => "drop_culture",
            AblationVariant::DropTermFrequency => "drop_term_frequency",
            AblationVariant::DropAccident => "drop_accident",
            AblationVariant::DropTimeEncoder => "drop_time_encoder",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant {s:?}")))
    }

    pub fn dropped_channel(self) -> Option<Channel> {
        match self {
            AblationVariant::DropCulture => Some(Channel::Culture),
            AblationVariant::DropTermFrequency => Some(Channel::TermFrequency),
            AblationVariant::DropAccident => Some(Channel::Accident),
            _ => None,
        }
    }

    /// Input layout and model configuration for this variant.
    pub fn apply(self, layout: &Layout, model: &ModelConfig) -> Result<(Layout, ModelConfig)> {
        let layout = match self.dropped_channel() {
            Some(ch) => layout.without(ch)?,
            None => layout.clone(),
        };
        let cfg = ModelConfig {
            segments: layout.segments(),
            features: layout.features_per_segment(),
            time_encoder: model.time_encoder && self != AblationVariant::DropTimeEncoder,
            ..model.clone()
        };
        Ok((layout, cfg))
    }
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub variant: AblationVariant,
    pub features: usize,
    pub report: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub model: ForecastModel,
}

/// Trains one variant from `model_cfg.seed` and evaluates it on the test span.
#[allow(clippy::too_many_arguments)]
pub fn ablate(
    variant: AblationVariant,
    traffic: &TrafficTensor,
    tweets: &TweetFeatureTensor,
    base_layout: &Layout,
    window: WindowSpec,
    split: &SplitSpec,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    test_stride: usize,
) -> Result<AblationRun> {
    let (layout, cfg) = variant.apply(base_layout, model_cfg)?;
    let ds = Dataset::build(traffic, tweets, layout, window, split.train.clone())?;
    let model = ForecastModel::new(cfg.clone())?;
    let out = train(&model, &ds, split, train_cfg)?;
    let report = evaluate(&out.model as &dyn Forecaster, &ds, &split.test, test_stride, train_cfg.mape_floor)?;
    Ok(AblationRun {
        variant,
        features: cfg.features,
        report,
        history: out.history,
        model: out.model,
    })
}
