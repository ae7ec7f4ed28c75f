//! Teacher-forced training with early stopping, and rollout evaluation.

use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamSettings};
use super::forecaster::Forecaster;
use super::metrics::{MetricsAccumulator, MetricsReport, DEFAULT_MAPE_FLOOR};
use crate::data::{Channel, Dataset, SplitSpec};
use crate::error::{contract, Error, Result};
use crate::model::ForecastModel;
use crate::numerics::{Matrix, RngState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "lr_default")]
    pub learning_rate: f64,
    #[serde(default = "batch_default")]
    pub batch_size: usize,
    #[serde(default = "epochs_default")]
    pub epochs: usize,
    #[serde(default = "patience_default")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    /// Spacing between training windows.
    #[serde(default = "one")]
    pub train_stride: usize,
    /// Spacing between validation windows.
    #[serde(default = "one")]
    pub val_stride: usize,
    #[serde(default = "floor_default")]
    pub mape_floor: f64,
}

fn lr_default() -> f64 {
    1e-3
}
fn batch_default() -> usize {
    32
}
fn epochs_default() -> usize {
    50
}
fn patience_default() -> usize {
    10
}
fn one() -> usize {
    1
}
fn floor_default() -> f64 {
    DEFAULT_MAPE_FLOOR
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: lr_default(),
            batch_size: batch_default(),
            epochs: epochs_default(),
            patience: patience_default(),
            seed: 0,
            train_stride: 1,
            val_stride: 1,
            mape_floor: DEFAULT_MAPE_FLOOR,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and nonnegative", self.learning_rate)));
        }
        if self.batch_size == 0 || self.train_stride == 0 || self.val_stride == 0 {
            return Err(Error::Config("batch size and strides must be at least 1".into()));
        }
        if self.mape_floor <= 0.0 {
            return Err(Error::Config("mape_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: ForecastModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mean teacher-forced loss and gradient over a batch of window offsets.
pub fn batch_gradient(model: &ForecastModel, ds: &Dataset, offsets: &[usize]) -> Result<(f64, Vec<Matrix>)> {
    let mut total: Vec<Matrix> = model.params().iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
    let mut loss_sum = 0.0;
    for &o in offsets {
        let (g, _, loss) = model.loss_graph(&ds.sample(o))?;
        loss_sum += g.value(loss).get(0, 0);
        let grads = g.backward(loss)?;
        for (acc, (_, gr)) in total.iter_mut().zip(&grads.params) {
            acc.add_assign(gr)?;
        }
    }
    let n = offsets.len() as f64;
    for t in &mut total {
        *t = t.scale(1.0 / n);
    }
    Ok((loss_sum / n, total))
}

pub fn train(model: &ForecastModel, ds: &Dataset, split: &SplitSpec, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    split.validate(ds.steps())?;
    let mut train_offsets = ds.offsets(&split.train, cfg.train_stride)?;
    let val_offsets = ds.offsets(&split.validation, cfg.val_stride)?;
    if train_offsets.is_empty() || val_offsets.is_empty() {
        return Err(contract("training and validation splits must each hold at least one window"));
    }
    let mut model = model.clone();
    if let Some(c) = ds.norm.channels.iter().position(|&c| c == Channel::Tps) {
        model.set_token_scaling(ds.norm.mean[c], ds.norm.std[c])?;
    }
    let mut opt = Adam::new(
        AdamSettings {
            lr: cfg.learning_rate,
            ..AdamSettings::default()
        },
        model.params(),
    );
    let mut rng = RngState::new(cfg.seed);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.clone());

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut train_offsets);
        let mut loss_sum = 0.0;
        for batch in train_offsets.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradient(&model, ds, batch).map_err(|e| overflow(e, epoch))?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(model.params_mut(), &grads);
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        let train_mse = loss_sum / train_offsets.len() as f64;
        let val_mse = rollout_mse(&model, ds, &val_offsets).map_err(|e| overflow(e, epoch))?;
        if !val_mse.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(EpochRecord { epoch, train_mse, val_mse });
        if val_mse < best.0 {
            best = (val_mse, epoch, model.clone());
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    let (_, best_epoch, model) = best;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Overflowing activations surface as all-NaN attention rows.
fn overflow(e: Error, epoch: usize) -> Error {
    match e {
        Error::DegenerateRow { .. } => Error::TrainingDiverged { epoch },
        other => other,
    }
}

fn rollout_mse(model: &ForecastModel, ds: &Dataset, offsets: &[usize]) -> Result<f64> {
    let mut acc = MetricsAccumulator::new(model.config().horizon, DEFAULT_MAPE_FLOOR)?;
    for &o in offsets {
        let s = ds.sample(o);
        acc.add(&model.predict(&s)?, &s.target)?;
    }
    Ok(acc.finish().overall.mse)
}

/// Rollout metrics of `f` over the windows of `range`.
pub fn evaluate(
    f: &dyn Forecaster,
    ds: &Dataset,
    range: &std::ops::Range<usize>,
    stride: usize,
    mape_floor: f64,
) -> Result<MetricsReport> {
    let offsets = ds.offsets(range, stride)?;
    if offsets.is_empty() {
        return Err(contract("evaluation range holds no windows"));
    }
    let mut acc = MetricsAccumulator::new(ds.window.out_len, mape_floor)?;
    for o in offsets {
        let s = ds.sample(o);
        acc.add(&f.forecast(&s)?, &s.target)?;
    }
    Ok(acc.finish())
}
