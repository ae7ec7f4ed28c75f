//! Traffic and tweet tensors on a shared 15-minute grid.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::text::SegmentFeatureSeries;
use crate::time::TimeGrid;

pub const TRAFFIC_CHANNELS: usize = 3;
pub const TWEET_CHANNELS: usize = 3;

/// Values indexed `(t, m, channel)` with channels `tps, volume, speed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficTensor {
    pub grid: TimeGrid,
    pub segment_ids: Vec<u32>,
    data: Vec<f64>,
}

impl TrafficTensor {
    pub fn new(grid: TimeGrid, segment_ids: Vec<u32>, data: Vec<f64>) -> Result<Self> {
        check_layout(&grid, &segment_ids, data.len(), TRAFFIC_CHANNELS)?;
        for (i, chunk) in data.chunks_exact(TRAFFIC_CHANNELS).enumerate() {
            let (tps, vol, spd) = (chunk[0], chunk[1], chunk[2]);
            if !(0.0..=1.0).contains(&tps) || !(vol >= 0.0 && vol.is_finite()) || !(spd >= 0.0 && spd.is_finite()) {
                let (t, m) = (i / segment_ids.len(), i % segment_ids.len());
                return Err(contract(format!(
                    "traffic value out of range at step {t}, segment {}: ({tps}, {vol}, {spd})",
                    segment_ids[m]
                )));
            }
        }
        Ok(Self { grid, segment_ids, data })
    }

    pub fn steps(&self) -> usize {
        self.grid.bins
    }

    pub fn segments(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn get(&self, t: usize, m: usize, channel: usize) -> f64 {
        self.data[(t * self.segments() + m) * TRAFFIC_CHANNELS + channel]
    }

    pub fn tps(&self, t: usize, m: usize) -> f64 {
        self.get(t, m, 0)
    }

    /// All `M × 3` values of one step, segment-major.
    pub fn step(&self, t: usize) -> &[f64] {
        let w = self.segments() * TRAFFIC_CHANNELS;
        &self.data[t * w..(t + 1) * w]
    }

    pub fn tps_series(&self, m: usize) -> Vec<f64> {
        (0..self.steps()).map(|t| self.tps(t, m)).collect()
    }

    /// Network-average TPS per step.
    pub fn mean_tps(&self) -> Vec<f64> {
        let m = self.segments() as f64;
        (0..self.steps())
            .map(|t| (0..self.segments()).map(|s| self.tps(t, s)).sum::<f64>() / m)
            .collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Values indexed `(t, m, k)` with `k` in `term_frequency, accident, culture`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetFeatureTensor {
    pub grid: TimeGrid,
    pub segment_ids: Vec<u32>,
    data: Vec<f64>,
}

impl TweetFeatureTensor {
    pub fn new(grid: TimeGrid, segment_ids: Vec<u32>, data: Vec<f64>) -> Result<Self> {
        check_layout(&grid, &segment_ids, data.len(), TWEET_CHANNELS)?;
        for chunk in data.chunks_exact(TWEET_CHANNELS) {
            if !chunk[0].is_finite() {
                return Err(contract("term frequency must be finite"));
            }
            for &c in &chunk[1..] {
                if c < 0.0 || c.fract() != 0.0 {
                    return Err(contract(format!("keyword count {c} is not a nonnegative integer")));
                }
            }
        }
        Ok(Self { grid, segment_ids, data })
    }

    pub fn zeros(grid: TimeGrid, segment_ids: Vec<u32>) -> Self {
        let n = grid.bins * segment_ids.len() * TWEET_CHANNELS;
        Self {
            grid,
            segment_ids,
            data: vec![0.0; n],
        }
    }

    /// Builds the tensor from per-segment series, ordered as `segment_ids`.
    pub fn from_series(grid: TimeGrid, segment_ids: &[u32], series: &[SegmentFeatureSeries]) -> Result<Self> {
        let mut out = Self::zeros(grid, segment_ids.to_vec());
        let m = segment_ids.len();
        for s in series {
            if s.grid != grid {
                return Err(Error::Alignment(format!("feature grid {:?} differs from {:?}", s.grid, grid)));
            }
            let idx = segment_ids
                .iter()
                .position(|&id| id == s.segment_id)
                .ok_or_else(|| Error::Alignment(format!("features for unknown segment {}", s.segment_id)))?;
            for t in 0..grid.bins {
                let base = (t * m + idx) * TWEET_CHANNELS;
                out.data[base] = s.term_frequency[t];
                out.data[base + 1] = f64::from(s.accident_count[t]);
                out.data[base + 2] = f64::from(s.culture_count[t]);
            }
        }
        Ok(out)
    }

    pub fn steps(&self) -> usize {
        self.grid.bins
    }

    pub fn segments(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn get(&self, t: usize, m: usize, k: usize) -> f64 {
        self.data[(t * self.segments() + m) * TWEET_CHANNELS + k]
    }

    pub fn step(&self, t: usize) -> &[f64] {
        let w = self.segments() * TWEET_CHANNELS;
        &self.data[t * w..(t + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn check_layout(grid: &TimeGrid, ids: &[u32], len: usize, channels: usize) -> Result<()> {
    if ids.is_empty() || grid.bins == 0 {
        return Err(contract("tensor needs at least one segment and one step"));
    }
    let want = grid.bins * ids.len() * channels;
    if len != want {
        return Err(contract(format!("tensor data has {len} values, expected {want}")));
    }
    Ok(())
}

pub fn check_aligned(x: &TrafficTensor, c: &TweetFeatureTensor) -> Result<()> {
    if x.grid != c.grid {
        return Err(Error::Alignment(format!("traffic grid {:?} vs tweet grid {:?}", x.grid, c.grid)));
    }
    if x.segment_ids != c.segment_ids {
        return Err(Error::Alignment("traffic and tweet segment sets differ".into()));
    }
    Ok(())
}
