//! Column-wise concatenation of traffic and tweet channels.

use serde::{Deserialize, Serialize};

use super::tensor::{check_aligned, TrafficTensor, TweetFeatureTensor, TRAFFIC_CHANNELS};
use crate::error::{contract, Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Tps,
    Volume,
    Speed,
    TermFrequency,
    Accident,
    Culture,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Tps,
        Channel::Volume,
        Channel::Speed,
        Channel::TermFrequency,
        Channel::Accident,
        Channel::Culture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Tps => "tps",
            Channel::Volume => "volume",
            Channel::Speed => "speed",
            Channel::TermFrequency => "term_frequency",
            Channel::Accident => "accident",
            Channel::Culture => "culture",
        }
    }

    pub fn is_traffic(self) -> bool {
        (self as usize) < TRAFFIC_CHANNELS
    }

    /// Index within its own tensor's channel axis.
    fn slot(self) -> usize {
        let i = self as usize;
        if self.is_traffic() {
            i
        } else {
            i - TRAFFIC_CHANNELS
        }
    }
}

/// Which `(segment, channel)` each fused index holds. Channels form blocks
/// of `M` consecutive entries in `channels` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub segment_ids: Vec<u32>,
    pub channels: Vec<Channel>,
}

impl Layout {
    pub fn new(segment_ids: Vec<u32>, channels: Vec<Channel>) -> Result<Self> {
        if segment_ids.is_empty() || channels.is_empty() {
            return Err(Error::Config("layout needs segments and channels".into()));
        }
        let mut seen = channels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != channels.len() {
            return Err(Error::Config("duplicate channel in layout".into()));
        }
        Ok(Self { segment_ids, channels })
    }

    pub fn full(segment_ids: Vec<u32>) -> Self {
        Self {
            segment_ids,
            channels: Channel::ALL.to_vec(),
        }
    }

    pub fn without(&self, drop: Channel) -> Result<Self> {
        Self::new(self.segment_ids.clone(), self.channels.iter().copied().filter(|&c| c != drop).collect())
    }

    pub fn segments(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn features_per_segment(&self) -> usize {
        self.channels.len()
    }

    pub fn width(&self) -> usize {
        self.segments() * self.channels.len()
    }

    pub fn index(&self, segment: usize, channel: Channel) -> Option<usize> {
        let block = self.channels.iter().position(|&c| c == channel)?;
        Some(block * self.segments() + segment)
    }

    /// `(segment index, channel)` held by fused index `i`.
    pub fn entry(&self, i: usize) -> (usize, Channel) {
        (i % self.segments(), self.channels[i / self.segments()])
    }

    pub fn entries(&self) -> Vec<(usize, Channel)> {
        (0..self.width()).map(|i| self.entry(i)).collect()
    }
}

/// Fuses one step: `traffic` is `M × 3` and `tweets` `M × 3`, segment-major.
pub fn fuse_step(traffic: &[f64], tweets: &[f64], layout: &Layout) -> Result<Vec<f64>> {
    let m = layout.segments();
    if traffic.len() != m * TRAFFIC_CHANNELS || tweets.len() != m * 3 {
        return Err(Error::Alignment(format!(
            "step has {} traffic and {} tweet values for {m} segments",
            traffic.len(),
            tweets.len()
        )));
    }
    let mut out = Vec::with_capacity(layout.width());
    for &ch in &layout.channels {
        let (src, slot) = if ch.is_traffic() { (traffic, ch.slot()) } else { (tweets, ch.slot()) };
        out.extend((0..m).map(|s| src[s * 3 + slot]));
    }
    Ok(out)
}

/// Inverse of [`fuse_step`]; channels absent from the layout come back as 0.
pub fn unfuse_step(fused: &[f64], layout: &Layout) -> Result<(Vec<f64>, Vec<f64>)> {
    if fused.len() != layout.width() {
        return Err(contract(format!("fused step has {} values, layout needs {}", fused.len(), layout.width())));
    }
    let m = layout.segments();
    let mut traffic = vec![0.0; m * 3];
    let mut tweets = vec![0.0; m * 3];
    for (i, &v) in fused.iter().enumerate() {
        let (s, ch) = layout.entry(i);
        let dst = if ch.is_traffic() { &mut traffic } else { &mut tweets };
        dst[s * 3 + ch.slot()] = v;
    }
    Ok((traffic, tweets))
}

/// Fused sequence, one row per step.
pub fn fuse(x: &TrafficTensor, c: &TweetFeatureTensor, layout: &Layout) -> Result<Matrix> {
    check_aligned(x, c)?;
    if layout.segment_ids != x.segment_ids {
        return Err(Error::Alignment("layout segments differ from tensor segments".into()));
    }
    let mut data = Vec::with_capacity(x.steps() * layout.width());
    for t in 0..x.steps() {
        data.extend(fuse_step(x.step(t), c.step(t), layout)?);
    }
    Matrix::from_vec(x.steps(), layout.width(), data)
}

pub fn unfuse(fused: &Matrix, x_grid: crate::time::TimeGrid, layout: &Layout) -> Result<(TrafficTensor, TweetFeatureTensor)> {
    if fused.rows() != x_grid.bins {
        return Err(Error::Alignment(format!("{} rows for a grid of {} bins", fused.rows(), x_grid.bins)));
    }
    let (mut tr, mut tw) = (Vec::new(), Vec::new());
    for t in 0..fused.rows() {
        let (a, b) = unfuse_step(fused.row(t), layout)?;
        tr.extend(a);
        tw.extend(b);
    }
    Ok((
        TrafficTensor::new(x_grid, layout.segment_ids.clone(), tr)?,
        TweetFeatureTensor::new(x_grid, layout.segment_ids.clone(), tw)?,
    ))
}
