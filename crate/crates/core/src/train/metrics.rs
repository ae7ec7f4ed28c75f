//! MSE, MAE and MAPE, overall and at fixed horizon steps.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::numerics::Matrix;

pub const DEFAULT_MAPE_FLOOR: f64 = 1e-3;
/// 1-based steps reported separately (15, 60, 120, 180 minutes).
pub const HORIZON_STEPS: [usize; 4] = [1, 4, 8, 12];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    /// Percent.
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub step: usize,
    pub minutes: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: Metrics,
    pub per_horizon: Vec<HorizonMetrics>,
    pub windows: usize,
}

impl MetricsReport {
    pub fn at_step(&self, step: usize) -> Option<&Metrics> {
        self.per_horizon.iter().find(|h| h.step == step).map(|h| &h.metrics)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    se: f64,
    ae: f64,
    ape: f64,
    n: usize,
}

impl Sums {
    fn add(&mut self, p: f64, y: f64, floor: f64) {
        let e = p - y;
        self.se += e * e;
        self.ae += e.abs();
        self.ape += (e / y.abs().max(floor)).abs();
        self.n += 1;
    }

    fn finish(&self) -> Metrics {
        let n = self.n.max(1) as f64;
        Metrics {
            mse: self.se / n,
            mae: self.ae / n,
            mape: 100.0 * self.ape / n,
        }
    }
}

/// Accumulates forecast/truth pairs over many windows.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    floor: f64,
    rows: usize,
    overall: Sums,
    by_row: Vec<Sums>,
    windows: usize,
}

impl MetricsAccumulator {
    pub fn new(rows: usize, mape_floor: f64) -> Result<Self> {
        if mape_floor <= 0.0 {
            return Err(contract("mape_floor must be positive"));
        }
        Ok(Self {
            floor: mape_floor,
            rows,
            overall: Sums::default(),
            by_row: vec![Sums::default(); rows],
            windows: 0,
        })
    }

    pub fn add(&mut self, pred: &Matrix, truth: &Matrix) -> Result<()> {
        if pred.shape() != truth.shape() || pred.rows() != self.rows {
            return Err(contract(format!("prediction {:?} vs truth {:?}", pred.shape(), truth.shape())));
        }
        for r in 0..pred.rows() {
            for (&p, &y) in pred.row(r).iter().zip(truth.row(r)) {
                self.overall.add(p, y, self.floor);
                self.by_row[r].add(p, y, self.floor);
            }
        }
        self.windows += 1;
        Ok(())
    }

    pub fn finish(&self) -> MetricsReport {
        MetricsReport {
            overall: self.overall.finish(),
            per_horizon: HORIZON_STEPS
                .iter()
                .filter(|&&s| s <= self.rows)
                .map(|&s| HorizonMetrics {
                    step: s,
                    minutes: 15 * s,
                    metrics: self.by_row[s - 1].finish(),
                })
                .collect(),
            windows: self.windows,
        }
    }
}

pub fn compute_metrics(pred: &Matrix, truth: &Matrix, mape_floor: f64) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new(truth.rows(), mape_floor)?;
    acc.add(pred, truth)?;
    Ok(acc.finish())
}
