//! Metrics, optimizer, training loop, baselines and ablations.

pub mod ablation;
pub mod adam;
pub mod forecaster;
mod fit;
pub mod metrics;

pub use ablation::{ablate, AblationRun, AblationVariant};
pub use adam::{Adam, AdamSettings};
pub use forecaster::{Forecaster, OracleStub, Persistence, SeasonalMean};
pub use fit::{batch_gradient, evaluate, train, EpochRecord, TrainConfig, TrainOutcome};
pub use metrics::{compute_metrics, HorizonMetrics, Metrics, MetricsAccumulator, MetricsReport, DEFAULT_MAPE_FLOOR, HORIZON_STEPS};
