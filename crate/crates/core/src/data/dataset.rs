//! Sliding windows, chronological splits and input normalization.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::fusion::{fuse, Channel, Layout};
use super::tensor::{TrafficTensor, TweetFeatureTensor};
use super::timeenc::calendar_matrix;
use crate::error::{contract, Error, Result};
use crate::numerics::Matrix;
use crate::time::{TimeGrid, BINS_PER_DAY};

pub const DEFAULT_IN_LEN: usize = 12;
pub const DEFAULT_OUT_LEN: usize = 12;

/// Offsets of every window of `in_len + out_len` steps inside `0..steps`.
pub fn window_offsets(steps: usize, in_len: usize, out_len: usize, stride: usize) -> Result<Vec<usize>> {
    if in_len == 0 || out_len == 0 || stride == 0 {
        return Err(contract("window lengths and stride must be positive"));
    }
    if steps < in_len + out_len {
        return Err(contract(format!("{steps} steps cannot hold a {in_len}+{out_len} window")));
    }
    Ok((0..=steps - in_len - out_len).step_by(stride).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub offset: usize,
    /// `in_len × width` fused inputs.
    pub input: Matrix,
    /// `in_len × 7`
    pub input_time: Matrix,
    /// `out_len × M` future TPS.
    pub target: Matrix,
    /// `out_len × 7`
    pub target_time: Matrix,
    /// TPS at the last input step.
    pub last_tps: Vec<f64>,
    pub input_ts: Vec<i64>,
    pub target_ts: Vec<i64>,
}

/// Unnormalized windows over all six channels.
pub fn make_windows(
    traffic: &TrafficTensor,
    tweets: &TweetFeatureTensor,
    in_len: usize,
    out_len: usize,
    stride: usize,
) -> Result<Vec<WindowedSample>> {
    let layout = Layout::full(traffic.segment_ids.clone());
    let ds = Dataset::with_norm(traffic, tweets, layout.clone(), in_len, out_len, NormStats::identity(&layout))?;
    Ok(window_offsets(ds.steps(), in_len, out_len, stride)?
        .into_iter()
        .map(|o| ds.sample(o))
        .collect())
}

/// Per-channel z-score parameters, in layout channel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub channels: Vec<Channel>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(layout: &Layout) -> Self {
        let n = layout.channels.len();
        Self {
            channels: layout.channels.clone(),
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    /// Fits on `rows` of a fused matrix. A constant channel gets unit scale.
    pub fn fit(fused: &Matrix, layout: &Layout, rows: Range<usize>) -> Result<Self> {
        if rows.is_empty() || rows.end > fused.rows() {
            return Err(contract(format!("normalization rows {rows:?} outside 0..{}", fused.rows())));
        }
        let m = layout.segments();
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for b in 0..layout.channels.len() {
            let vals = || rows.clone().flat_map(move |r| (0..m).map(move |s| fused.get(r, b * m + s)));
            let n = (rows.len() * m) as f64;
            let mu = vals().sum::<f64>() / n;
            let var = vals().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            mean.push(mu);
            std.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Self {
            channels: layout.channels.clone(),
            mean,
            std,
        })
    }

    pub fn apply(&self, fused: &Matrix, layout: &Layout) -> Result<Matrix> {
        if self.channels != layout.channels || fused.cols() != layout.width() {
            return Err(contract("normalization statistics do not match the layout"));
        }
        let m = layout.segments();
        let mut out = fused.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let b = c / m;
                *v = (*v - self.mean[b]) / self.std[b];
            }
        }
        Ok(out)
    }
}

/// Chronological step ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitSpec {
    pub fn from_days(train: usize, validation: usize, test: usize) -> Self {
        let a = train * BINS_PER_DAY;
        let b = a + validation * BINS_PER_DAY;
        let c = b + test * BINS_PER_DAY;
        Self {
            train: 0..a,
            validation: a..b,
            test: b..c,
        }
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        let ordered = self.train.start <= self.train.end
            && self.train.end <= self.validation.start
            && self.validation.start <= self.validation.end
            && self.validation.end <= self.test.start
            && self.test.start <= self.test.end;
        if !ordered {
            return Err(Error::Config("splits must be ordered train < validation < test".into()));
        }
        if self.test.end > steps {
            return Err(Error::Config(format!("split ends at {} but data has {steps} steps", self.test.end)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub in_len: usize,
    pub out_len: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            in_len: DEFAULT_IN_LEN,
            out_len: DEFAULT_OUT_LEN,
        }
    }
}

/// Everything needed to rebuild the training-time encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub grid: TimeGrid,
    pub layout: Layout,
    pub layout_entries: Vec<(u32, Channel)>,
    pub norm: NormStats,
    pub window: WindowSpec,
    pub split: SplitSpec,
}

/// A normalized fused sequence with TPS targets and calendar rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub layout: Layout,
    pub grid: TimeGrid,
    pub window: WindowSpec,
    pub norm: NormStats,
    inputs: Matrix,
    tps: Matrix,
    calendar: Matrix,
}

impl Dataset {
    /// Normalization fitted on `norm_rows`.
    pub fn build(
        traffic: &TrafficTensor,
        tweets: &TweetFeatureTensor,
        layout: Layout,
        window: WindowSpec,
        norm_rows: Range<usize>,
    ) -> Result<Self> {
        let fused = fuse(traffic, tweets, &layout)?;
        let norm = NormStats::fit(&fused, &layout, norm_rows)?;
        Self::assemble(traffic, fused, layout, window, norm)
    }

    pub fn with_norm(
        traffic: &TrafficTensor,
        tweets: &TweetFeatureTensor,
        layout: Layout,
        in_len: usize,
        out_len: usize,
        norm: NormStats,
    ) -> Result<Self> {
        let fused = fuse(traffic, tweets, &layout)?;
        Self::assemble(traffic, fused, layout, WindowSpec { in_len, out_len }, norm)
    }

    fn assemble(traffic: &TrafficTensor, fused: Matrix, layout: Layout, window: WindowSpec, norm: NormStats) -> Result<Self> {
        let inputs = norm.apply(&fused, &layout)?;
        let (n, m) = (traffic.steps(), traffic.segments());
        let mut tps = Matrix::zeros(n, m);
        for t in 0..n {
            for s in 0..m {
                tps.set(t, s, traffic.tps(t, s));
            }
        }
        let ts: Vec<i64> = (0..n).map(|t| traffic.grid.bin_start(t)).collect();
        Ok(Self {
            grid: traffic.grid,
            calendar: calendar_matrix(&ts)?,
            layout,
            window,
            norm,
            inputs,
            tps,
        })
    }

    pub fn steps(&self) -> usize {
        self.grid.bins
    }

    pub fn segments(&self) -> usize {
        self.layout.segments()
    }

    pub fn tps(&self) -> &Matrix {
        &self.tps
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    /// Window offsets lying entirely inside `range`.
    pub fn offsets(&self, range: &Range<usize>, stride: usize) -> Result<Vec<usize>> {
        let span = self.window.in_len + self.window.out_len;
        if range.end > self.steps() || range.len() < span {
            return Ok(Vec::new());
        }
        Ok(window_offsets(range.len(), self.window.in_len, self.window.out_len, stride)?
            .into_iter()
            .map(|o| o + range.start)
            .collect())
    }

    pub fn sample(&self, offset: usize) -> WindowedSample {
        let WindowSpec { in_len, out_len } = self.window;
        let t0 = offset + in_len;
        let rows = |m: &Matrix, a: usize, n: usize| m.slice_rows(a, n).expect("window inside data");
        WindowedSample {
            offset,
            input: rows(&self.inputs, offset, in_len),
            input_time: rows(&self.calendar, offset, in_len),
            target: rows(&self.tps, t0, out_len),
            target_time: rows(&self.calendar, t0, out_len),
            last_tps: self.tps.row(t0 - 1).to_vec(),
            input_ts: (offset..t0).map(|t| self.grid.bin_start(t)).collect(),
            target_ts: (t0..t0 + out_len).map(|t| self.grid.bin_start(t)).collect(),
        }
    }

    pub fn manifest(&self, split: &SplitSpec) -> DatasetManifest {
        DatasetManifest {
            grid: self.grid,
            layout: self.layout.clone(),
            layout_entries: self
                .layout
                .entries()
                .into_iter()
                .map(|(s, c)| (self.layout.segment_ids[s], c))
                .collect(),
            norm: self.norm.clone(),
            window: self.window,
            split: split.clone(),
        }
    }
}
