//! Per-segment, per-bin tweet channels: term frequency, accident and
//! culture keyword counts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dtm::DocumentTermMatrix;
use super::geo::{assign_to_segment, SegmentCenter, DEFAULT_RADIUS_KM};
use super::lexicon::KeywordLexicon;
use super::svd::{explained_variance_curve, truncated_svd, SvdFactors};
use super::tokenize::tokenize;
use crate::error::{contract, Error, Result};
use crate::numerics::RngState;
use crate::time::TimeGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub ts: i64,
    pub lat: f64,
    pub lon: f64,
    pub text: String,
    /// Collection site label, used only with an explicit site map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
}

impl TweetRecord {
    pub fn new(ts: i64, lat: f64, lon: f64, text: impl Into<String>) -> Self {
        Self {
            ts,
            lat,
            lon,
            text: text.into(),
            site: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(contract(format!("coordinates ({}, {}) out of range", self.lat, self.lon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatureSeries {
    pub segment_id: u32,
    pub grid: TimeGrid,
    pub term_frequency: Vec<f64>,
    pub accident_count: Vec<u32>,
    pub culture_count: Vec<u32>,
}

impl SegmentFeatureSeries {
    pub fn zeros(segment_id: u32, grid: TimeGrid) -> Self {
        Self {
            segment_id,
            grid,
            term_frequency: vec![0.0; grid.bins],
            accident_count: vec![0; grid.bins],
            culture_count: vec![0; grid.bins],
        }
    }
}

/// Where each document landed: `(segment index, bin)` or nothing.
pub type DocBins = [Option<(usize, usize)>];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TermFreqMode {
    /// Sum of each document's reduced-space coordinates.
    #[default]
    Svd,
    /// Sum of each document's retained token counts.
    Raw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub min_count: u32,
    pub svd_k: usize,
    pub radius_km: f64,
    pub mode: TermFreqMode,
    pub seed: u64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            min_count: 3,
            svd_k: 100,
            radius_km: DEFAULT_RADIUS_KM,
            mode: TermFreqMode::Svd,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub series: Vec<SegmentFeatureSeries>,
    /// Cumulative explained-variance ratio (empty when no SVD ran).
    pub explained_variance: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub vocab_len: usize,
    pub assigned: usize,
    pub unassigned: usize,
}

/// Per-bin sum of projected coordinates, one vector per segment.
/// `doc_bins[i]` refers to row `i` of the factors.
pub fn term_frequency_signal(f: &SvdFactors, doc_bins: &DocBins, segments: usize, bins: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; bins]; segments];
    for (i, slot) in doc_bins.iter().enumerate() {
        if let Some((s, b)) = *slot {
            out[s][b] += f.projected_row(i).iter().sum::<f64>();
        }
    }
    out
}

/// Per-bin number of documents matching the lexicon (a document counts once).
pub fn keyword_count(docs: &[Vec<String>], lexicon: &KeywordLexicon, doc_bins: &DocBins, segments: usize, bins: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; bins]; segments];
    for (toks, slot) in docs.iter().zip(doc_bins) {
        if let Some((s, b)) = *slot {
            if lexicon.matches_tokens(toks) {
                out[s][b] += 1;
            }
        }
    }
    out
}

/// Resolves each tweet to a `(segment index, bin)`. A tweet with a `site`
/// listed in `site_map` goes to that segment; everything else uses the
/// nearest center within `radius_km`.
pub fn assign_tweets(
    tweets: &[TweetRecord],
    centers: &[SegmentCenter],
    site_map: Option<&HashMap<String, u32>>,
    grid: &TimeGrid,
    radius_km: f64,
) -> Result<Vec<Option<(usize, usize)>>> {
    if radius_km <= 0.0 {
        return Err(contract("radius_km must be positive"));
    }
    let by_id: HashMap<u32, usize> = centers.iter().enumerate().map(|(i, c)| (c.segment_id, i)).collect();
    tweets
        .iter()
        .map(|t| {
            let Some(bin) = grid.bin_of(t.ts) else {
                return Ok(None);
            };
            let mapped = match (site_map, &t.site) {
                (Some(map), Some(site)) => map.get(site),
                _ => None,
            };
            let seg = match mapped {
                Some(id) => Some(
                    *by_id
                        .get(id)
                        .ok_or_else(|| Error::Config(format!("site map points to unknown segment {id}")))?,
                ),
                None => assign_to_segment(t.lat, t.lon, centers, radius_km),
            };
            Ok(seg.map(|s| (s, bin)))
        })
        .collect()
}

/// Full tweet-to-feature pipeline over `grid`.
pub fn extract_features(
    tweets: &[TweetRecord],
    centers: &[SegmentCenter],
    site_map: Option<&HashMap<String, u32>>,
    grid: &TimeGrid,
    accident: &KeywordLexicon,
    culture: &KeywordLexicon,
    opts: &FeatureOptions,
) -> Result<FeatureSet> {
    if centers.is_empty() {
        return Err(contract("no segment centers"));
    }
    for t in tweets {
        t.validate()?;
    }
    let all_bins = assign_tweets(tweets, centers, site_map, grid, opts.radius_km)?;

    // Only tweets that land somewhere enter the document-term matrix.
    let mut docs = Vec::new();
    let mut doc_bins = Vec::new();
    for (t, slot) in tweets.iter().zip(&all_bins) {
        if slot.is_some() {
            docs.push(tokenize(&t.text));
            doc_bins.push(*slot);
        }
    }
    let (segments, bins) = (centers.len(), grid.bins);
    let mut series: Vec<SegmentFeatureSeries> = centers
        .iter()
        .map(|c| SegmentFeatureSeries::zeros(c.segment_id, *grid))
        .collect();
    let mut set = FeatureSet {
        series: Vec::new(),
        explained_variance: Vec::new(),
        singular_values: Vec::new(),
        vocab_len: 0,
        assigned: docs.len(),
        unassigned: tweets.len() - docs.len(),
    };
    if docs.is_empty() {
        set.series = series;
        return Ok(set);
    }

    let acc = keyword_count(&docs, accident, &doc_bins, segments, bins);
    let cul = keyword_count(&docs, culture, &doc_bins, segments, bins);
    let dtm = DocumentTermMatrix::from_tokens(&docs, opts.min_count)?;
    set.vocab_len = dtm.vocab_len();
    let tf = match opts.mode {
        TermFreqMode::Raw => {
            let mut out = vec![vec![0.0; bins]; segments];
            for (total, slot) in dtm.doc_totals().into_iter().zip(&doc_bins) {
                if let Some((s, b)) = *slot {
                    out[s][b] += total as f64;
                }
            }
            out
        }
        TermFreqMode::Svd => {
            let k = opts.svd_k.min(dtm.docs()).min(dtm.vocab_len());
            if k == 0 {
                vec![vec![0.0; bins]; segments]
            } else {
                let mut rng = RngState::new(opts.seed);
                let f = truncated_svd(&dtm, k, &mut rng)?;
                set.explained_variance = explained_variance_curve(&f);
                set.singular_values = f.singular_values.clone();
                term_frequency_signal(&f, &doc_bins, segments, bins)
            }
        }
    };
    for (i, s) in series.iter_mut().enumerate() {
        s.term_frequency = tf[i].clone();
        s.accident_count = acc[i].clone();
        s.culture_count = cul[i].clone();
    }
    set.series = series;
    Ok(set)
}
