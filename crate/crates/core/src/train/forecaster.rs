//! Anything that turns an input window into a horizon × M forecast.

use crate::data::{Dataset, WindowedSample};
use crate::error::{contract, Result};
use crate::model::ForecastModel;
use crate::numerics::Matrix;
use crate::stats::{aggregate_hourly, compute_trend, TrendTable};
use crate::time::TimeGrid;

pub trait Forecaster {
    fn forecast(&self, s: &WindowedSample) -> Result<Matrix>;
}

impl Forecaster for ForecastModel {
    fn forecast(&self, s: &WindowedSample) -> Result<Matrix> {
        self.predict(s)
    }
}

/// Returns the ground truth; checks the evaluation harness itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleStub;

impl Forecaster for OracleStub {
    fn forecast(&self, s: &WindowedSample) -> Result<Matrix> {
        Ok(s.target.clone())
    }
}

/// Repeats the last observed TPS.
#[derive(Debug, Clone, Copy)]
pub struct Persistence {
    pub horizon: usize,
}

impl Forecaster for Persistence {
    fn forecast(&self, s: &WindowedSample) -> Result<Matrix> {
        let rows = vec![s.last_tps.clone(); self.horizon];
        Matrix::from_rows(&rows)
    }
}

/// Hour-of-day × day-of-week mean TPS per segment.
#[derive(Debug, Clone)]
pub struct SeasonalMean {
    pub tables: Vec<TrendTable>,
}

impl SeasonalMean {
    /// Fits on TPS rows `range` of the dataset (which must start on an hour).
    pub fn fit(ds: &Dataset, range: &std::ops::Range<usize>) -> Result<Self> {
        let grid = TimeGrid {
            start: ds.grid.bin_start(range.start),
            bins: range.len(),
        };
        let tables = (0..ds.segments())
            .map(|m| {
                let vals: Vec<f64> = range.clone().map(|t| ds.tps().get(t, m)).collect();
                compute_trend(&aggregate_hourly(&grid, &vals)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }
}

impl Forecaster for SeasonalMean {
    fn forecast(&self, s: &WindowedSample) -> Result<Matrix> {
        let mut out = Matrix::zeros(s.target_ts.len(), self.tables.len());
        for (r, &ts) in s.target_ts.iter().enumerate() {
            for (m, t) in self.tables.iter().enumerate() {
                let v = t
                    .at(ts)
                    .ok_or_else(|| contract(format!("no seasonal mean for timestamp {ts}")))?;
                out.set(r, m, v);
            }
        }
        Ok(out)
    }
}
