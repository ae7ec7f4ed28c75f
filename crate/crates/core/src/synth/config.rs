use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::LexiconKind;
use crate::time::parse_iso;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub kind: LexiconKind,
    /// Segment index, `0..segments`.
    pub segment: usize,
    /// ISO-8601 start; must sit on a 15-minute boundary.
    pub start: String,
    pub duration_bins: usize,
    pub tps_drop: f64,
    /// Keyword tweets emitted over the first two bins.
    pub burst_tweets: usize,
    /// Bins between the tweet burst and the start of the TPS drop.
    #[serde(default)]
    pub delay_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub segments: usize,
    pub days: usize,
    pub seed: u64,
    /// ISO-8601, midnight UTC.
    pub start: String,

    pub base_tps: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub noise_sd: f64,
    /// Network-wide AR(1) deviation: stationary sd and hourly persistence.
    pub factor_sd: f64,
    pub factor_hourly_phi: f64,
    /// Per-segment AR(1) deviation: stationary sd and 15-minute persistence.
    pub segment_sd: f64,
    pub segment_phi: f64,

    /// Background tweets per hour per segment.
    pub tweet_rate: f64,
    /// Sd of the log-rate modulation.
    pub rate_sigma: f64,
    pub planted_lag_hours: usize,
    pub target_correlation: f64,

    pub accident_rate_per_day: f64,
    pub accident_drop: f64,
    pub accident_duration_bins: usize,
    pub accident_delay_bins: usize,
    pub accident_burst: usize,
    pub culture_events: usize,
    pub culture_drop: f64,
    pub culture_duration_bins: usize,
    pub culture_burst: usize,
    pub events: Vec<EventSpec>,

    pub center_lat: f64,
    pub center_lon: f64,
    pub spacing_km: f64,
    pub tweet_radius_km: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            segments: 10,
            days: 90,
            seed: 0,
            start: "2020-03-02T00:00:00Z".into(),
            base_tps: 0.8,
            daily_amplitude: 0.12,
            weekly_amplitude: 0.03,
            noise_sd: 0.01,
            factor_sd: 0.07,
            factor_hourly_phi: 0.9,
            segment_sd: 0.03,
            segment_phi: 0.97,
            tweet_rate: 5.0,
            rate_sigma: 0.5,
            planted_lag_hours: 10,
            target_correlation: -0.3,
            accident_rate_per_day: 0.05,
            accident_drop: 0.2,
            accident_duration_bins: 12,
            accident_delay_bins: 2,
            accident_burst: 5,
            culture_events: 4,
            culture_drop: 0.03,
            culture_duration_bins: 16,
            culture_burst: 12,
            events: Vec::new(),
            center_lat: 47.6,
            center_lon: -122.33,
            spacing_km: 15.0,
            tweet_radius_km: 2.0,
        }
    }
}

impl ScenarioConfig {
    pub fn standard(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// Frequent, large accidents whose tweets lead the TPS drop.
    pub fn accident_planted(seed: u64) -> Self {
        Self {
            seed,
            accident_rate_per_day: 0.6,
            accident_drop: 0.3,
            accident_duration_bins: 12,
            accident_delay_bins: 4,
            accident_burst: 6,
            ..Self::default()
        }
    }

    pub fn start_ts(&self) -> Result<i64> {
        let ts = parse_iso(&self.start).map_err(|e| Error::Config(format!("start: {e}")))?;
        if ts.rem_euclid(86_400) != 0 {
            return Err(Error::Config("start must be midnight UTC".into()));
        }
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.segments < 1 || self.days < 2 {
            return bad("need at least 1 segment and 2 days");
        }
        self.start_ts()?;
        if !(self.target_correlation > -1.0 && self.target_correlation < 1.0) {
            return bad("target_correlation must lie in (-1, 1)");
        }
        if !(0.0..1.0).contains(&self.factor_hourly_phi) || !(0.0..1.0).contains(&self.segment_phi) {
            return bad("AR persistence must lie in [0, 1)");
        }
        let nonneg = [
            self.base_tps,
            self.daily_amplitude,
            self.weekly_amplitude,
            self.noise_sd,
            self.factor_sd,
            self.segment_sd,
            self.tweet_rate,
            self.accident_rate_per_day,
            self.accident_drop,
            self.culture_drop,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("amplitudes, rates and noise levels must be finite and nonnegative");
        }
        if self.base_tps > 1.0 {
            return bad("base_tps must be at most 1");
        }
        if !(self.rate_sigma > 0.0) && self.target_correlation != 0.0 {
            return bad("rate_sigma must be positive to plant a correlation");
        }
        if self.planted_lag_hours >= self.days * 24 / 2 {
            return bad("planted lag is too long for the span");
        }
        if !(self.spacing_km > 2.0 * self.tweet_radius_km) || !(self.tweet_radius_km > 0.0) {
            return bad("segment spacing must exceed twice the tweet radius");
        }
        for e in &self.events {
            if e.segment >= self.segments {
                return bad(&format!("event segment {} out of range", e.segment));
            }
            if !(e.tps_drop > 0.0 && e.tps_drop < 1.0) {
                return bad("event tps_drop must lie in (0, 1)");
            }
            if e.duration_bins == 0 {
                return bad("event duration must be positive");
            }
        }
        Ok(())
    }
}
