//! Hour-of-day × day-of-week seasonal component and its removal.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::time::{TimeGrid, BINS_PER_HOUR};

pub const HOUR_SECONDS: i64 = 3600;

/// `(hour, day-of-week)` of a UTC timestamp, Monday = 0.
pub fn hour_dow(ts: i64) -> (usize, usize) {
    let days = ts.div_euclid(86_400);
    let hour = ts.rem_euclid(86_400) / HOUR_SECONDS;
    // 1970-01-01 was a Thursday.
    (hour as usize, (days + 3).rem_euclid(7) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    /// Hour-aligned UTC seconds of the first value.
    pub start: i64,
    pub values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        self.start + i as i64 * HOUR_SECONDS
    }
}

/// Averages 15-minute bins into hours. NaN marks a missing bin; an hour
/// with no bins left is filled by linear interpolation between the nearest
/// observed hours (held constant past either end). Trailing bins that do
/// not fill an hour are dropped.
pub fn aggregate_hourly(grid: &TimeGrid, bins: &[f64]) -> Result<HourlySeries> {
    if bins.len() != grid.bins {
        return Err(contract(format!("{} values for a grid of {} bins", bins.len(), grid.bins)));
    }
    if grid.start.rem_euclid(HOUR_SECONDS) != 0 {
        return Err(contract("hourly aggregation needs an hour-aligned grid"));
    }
    let hours = grid.bins / BINS_PER_HOUR;
    let mut values: Vec<f64> = (0..hours)
        .map(|h| {
            let chunk = &bins[h * BINS_PER_HOUR..(h + 1) * BINS_PER_HOUR];
            let (sum, n) = chunk
                .iter()
                .filter(|v| v.is_finite())
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect();
    fill_gaps(&mut values)?;
    Ok(HourlySeries::new(grid.start, values))
}

/// Linear interpolation over NaN runs; constant extension at the ends.
pub fn fill_gaps(values: &mut [f64]) -> Result<()> {
    let known: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    if known.is_empty() {
        return if values.is_empty() {
            Ok(())
        } else {
            Err(contract("series has no observed values"))
        };
    }
    let (first, last) = (known[0], known[known.len() - 1]);
    let (vf, vl) = (values[first], values[last]);
    values[..first].fill(vf);
    values[last + 1..].fill(vl);
    for w in known.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (va, vb) = (values[a], values[b]);
        for i in a + 1..b {
            let f = (i - a) as f64 / (b - a) as f64;
            values[i] = va + f * (vb - va);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    /// `means[h][d]`, NaN where `counts[h][d] == 0`.
    pub means: Vec<[f64; 7]>,
    pub counts: Vec<[u32; 7]>,
}

impl TrendTable {
    pub fn mean(&self, h: usize, d: usize) -> Option<f64> {
        (self.counts[h][d] > 0).then(|| self.means[h][d])
    }

    pub fn at(&self, ts: i64) -> Option<f64> {
        let (h, d) = hour_dow(ts);
        self.mean(h, d)
    }
}

pub fn compute_trend(series: &HourlySeries) -> Result<TrendTable> {
    if series.is_empty() {
        return Err(contract("cannot compute a trend from an empty series"));
    }
    let mut sums = vec![[0.0f64; 7]; 24];
    let mut counts = vec![[0u32; 7]; 24];
    for (i, &v) in series.values.iter().enumerate() {
        let (h, d) = hour_dow(series.timestamp(i));
        sums[h][d] += v;
        counts[h][d] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| std::array::from_fn(|d| if c[d] > 0 { s[d] / f64::from(c[d]) } else { f64::NAN }))
        .collect();
    Ok(TrendTable { means, counts })
}

pub fn detrend(series: &HourlySeries, trend: &TrendTable) -> Result<HourlySeries> {
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (h, d) = hour_dow(series.timestamp(i));
            trend
                .mean(h, d)
                .map(|m| v - m)
                .ok_or_else(|| contract(format!("trend has no value for hour {h}, day {d}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(HourlySeries::new(series.start, values))
}
