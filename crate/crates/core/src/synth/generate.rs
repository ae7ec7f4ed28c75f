//! Seeded scenario generation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::{EventSpec, ScenarioConfig};
use super::words;
use crate::data::TrafficTensor;
use crate::error::{Error, Result};
use crate::numerics::RngState;
use crate::stats::{aggregate_hourly, compute_trend, detrend, hour_dow};
use crate::text::geo::destination;
use crate::text::{LexiconKind, SegmentCenter, TweetRecord};
use crate::time::{format_iso, parse_iso, TimeGrid, BIN_SECONDS, BINS_PER_DAY, BINS_PER_HOUR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: LexiconKind,
    pub segment_id: u32,
    pub start: String,
    pub start_bin: usize,
    pub drop_start_bin: usize,
    pub duration_bins: usize,
    pub tps_drop: f64,
    /// `(bin index, keyword tweets emitted in that bin)`.
    pub tweet_bins: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCorrelation {
    pub lag_hours: usize,
    pub target: f64,
    /// Loading of the future detrended network TPS in the log-rate driver.
    pub loading: f64,
    pub rate_sigma: f64,
    pub mean_hourly_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub config: ScenarioConfig,
    pub grid: TimeGrid,
    pub centers: Vec<SegmentCenter>,
    pub events: Vec<EventRecord>,
    pub planted: PlantedCorrelation,
    pub background_tweets: usize,
    pub accident_tweets: usize,
    pub culture_tweets: usize,
}

impl ScenarioManifest {
    /// Planted keyword tweets per `(segment id, bin)`.
    pub fn keyword_counts(&self, kind: LexiconKind) -> BTreeMap<(u32, usize), u32> {
        let mut out = BTreeMap::new();
        for e in self.events.iter().filter(|e| e.kind == kind) {
            for &(b, n) in &e.tweet_bins {
                *out.entry((e.segment_id, b)).or_default() += n;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub traffic: TrafficTensor,
    pub tweets: Vec<TweetRecord>,
    pub centers: Vec<SegmentCenter>,
    pub manifest: ScenarioManifest,
}

fn daily(x: f64) -> f64 {
    let p = x - 3.0 / 24.0;
    ((2.0 * PI * p).cos() + 0.5 * (4.0 * PI * p).cos()) / 1.5
}

fn tweet_profile(x: f64) -> f64 {
    1.0 + 0.5 * (2.0 * PI * (x - 0.3)).sin()
}

fn ar1(rng: &mut RngState, n: usize, phi: f64, sd: f64) -> Vec<f64> {
    let innov = sd * (1.0 - phi * phi).sqrt();
    let mut x = rng.gaussian(0.0, sd);
    (0..n)
        .map(|_| {
            let v = x;
            x = phi * x + rng.gaussian(0.0, innov);
            v
        })
        .collect()
}

fn trapezoid(k: usize, dur: usize) -> f64 {
    let ramp = BINS_PER_HOUR as f64;
    1f64.min((k + 1) as f64 / ramp).min((dur - k) as f64 / ramp)
}

fn layout_centers(cfg: &ScenarioConfig) -> Vec<SegmentCenter> {
    let cols = (cfg.segments as f64).sqrt().ceil() as usize;
    let rows = cfg.segments.div_ceil(cols);
    (0..cfg.segments)
        .map(|i| {
            let (r, c) = ((i / cols) as f64, (i % cols) as f64);
            let north = (r - (rows as f64 - 1.0) / 2.0) * cfg.spacing_km;
            let east = (c - (cols as f64 - 1.0) / 2.0) * cfg.spacing_km;
            let (lat, lon) = destination(cfg.center_lat, cfg.center_lon, north.abs(), if north < 0.0 { PI } else { 0.0 });
            let (lat, lon) = destination(lat, lon, east.abs(), if east < 0.0 { -PI / 2.0 } else { PI / 2.0 });
            SegmentCenter { segment_id: i as u32, lat, lon }
        })
        .collect()
}

struct Placed {
    kind: LexiconKind,
    segment: usize,
    start_bin: usize,
    delay: usize,
    duration: usize,
    drop: f64,
    burst: usize,
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let start = cfg.start_ts()?;
    let (m_count, n) = (cfg.segments, cfg.days * BINS_PER_DAY);
    let grid = TimeGrid::new(start, n)?;
    let root = RngState::new(cfg.seed);
    let centers = layout_centers(cfg);

    let mut rng = root.derive(1);
    let seg_base: Vec<f64> = (0..m_count).map(|_| cfg.base_tps + rng.uniform_range(-0.04, 0.04)).collect();
    let seg_amp: Vec<f64> = (0..m_count).map(|_| rng.uniform_range(0.8, 1.2)).collect();
    let det = |m: usize, t: usize| {
        let ts = grid.bin_start(t);
        let x = ts.rem_euclid(86_400) as f64 / 86_400.0;
        let (_, dow) = hour_dow(ts);
        let weekly = if dow >= 5 { 1.0 } else { -0.4 };
        seg_base[m] + seg_amp[m] * cfg.daily_amplitude * daily(x) + cfg.weekly_amplitude * weekly
    };

    // Events: explicit, then random accidents and culture events.
    let mut placed = Vec::new();
    for e in &cfg.events {
        placed.push(place_explicit(e, &grid)?);
    }
    let mut rng = root.derive(4);
    let accident_len = cfg.accident_delay_bins + cfg.accident_duration_bins;
    for m in 0..m_count {
        for day in 0..cfg.days {
            for _ in 0..rng.poisson(cfg.accident_rate_per_day) {
                let s = day * BINS_PER_DAY + rng.below(BINS_PER_DAY);
                if s + accident_len + 2 > n || cfg.accident_duration_bins == 0 {
                    continue;
                }
                placed.push(Placed {
                    kind: LexiconKind::Accident,
                    segment: m,
                    start_bin: s,
                    delay: cfg.accident_delay_bins,
                    duration: cfg.accident_duration_bins,
                    drop: cfg.accident_drop * rng.uniform_range(0.7, 1.0),
                    burst: cfg.accident_burst,
                });
            }
        }
    }
    let mut rng = root.derive(8);
    for _ in 0..cfg.culture_events {
        let span = n.saturating_sub(cfg.culture_duration_bins + 2);
        if span == 0 || cfg.culture_duration_bins == 0 {
            break;
        }
        placed.push(Placed {
            kind: LexiconKind::Culture,
            segment: rng.below(m_count),
            start_bin: rng.below(span),
            delay: 0,
            duration: cfg.culture_duration_bins,
            drop: cfg.culture_drop,
            burst: cfg.culture_burst,
        });
    }

    let mut drops = vec![0.0; n * m_count];
    for p in &placed {
        let d0 = p.start_bin + p.delay;
        for k in 0..p.duration {
            let t = d0 + k;
            if t >= n {
                break;
            }
            let amount = p.drop * trapezoid(k, p.duration);
            if det(p.segment, t) - amount < 0.0 {
                return Err(Error::Config(format!(
                    "event on segment {} at {} drops TPS below zero",
                    p.segment,
                    format_iso(grid.bin_start(p.start_bin))
                )));
            }
            drops[t * m_count + p.segment] += amount;
        }
    }

    // TPS and derived channels.
    let phi15 = cfg.factor_hourly_phi.powf(0.25);
    let factor = ar1(&mut root.derive(2), n, phi15, cfg.factor_sd);
    let mut data = vec![0.0; n * m_count * 3];
    for m in 0..m_count {
        let dev = ar1(&mut root.derive(100 + m as u64), n, cfg.segment_phi, cfg.segment_sd);
        let mut noise = root.derive(200 + m as u64);
        for t in 0..n {
            let raw = det(m, t) + factor[t] + dev[t] + noise.gaussian(0.0, cfg.noise_sd) - drops[t * m_count + m];
            let tps = raw.clamp(0.0, 1.0);
            let i = (t * m_count + m) * 3;
            data[i] = tps;
            data[i + 1] = 30.0 + 170.0 * (1.0 - tps);
            data[i + 2] = 70.0 * tps;
        }
    }
    let ids: Vec<u32> = centers.iter().map(|c| c.segment_id).collect();
    let traffic = TrafficTensor::new(grid, ids, data)?;

    // Log-rate driver loading on the future detrended network TPS.
    let hourly = aggregate_hourly(&grid, &traffic.mean_tps())?;
    let vd = detrend(&hourly, &compute_trend(&hourly)?)?.values;
    let h_count = vd.len();
    let sd = (vd.iter().map(|v| v * v).sum::<f64>() / h_count as f64).sqrt();
    let vt: Vec<f64> = vd.iter().map(|v| if sd > 0.0 { v / sd } else { 0.0 }).collect();
    let bin_rate = |t: usize| {
        let x = grid.bin_start(t).rem_euclid(86_400) as f64 / 86_400.0;
        cfg.tweet_rate / BINS_PER_HOUR as f64 * tweet_profile(x)
    };
    let lambda: Vec<f64> = (0..h_count)
        .map(|h| (0..BINS_PER_HOUR).map(|b| bin_rate(h * BINS_PER_HOUR + b)).sum::<f64>() * m_count as f64)
        .collect();
    let e1 = lambda.iter().sum::<f64>() / h_count as f64;
    let e2 = lambda.iter().map(|l| l * l).sum::<f64>() / h_count as f64;
    let kappa = cfg.rate_sigma;
    let loading = if cfg.target_correlation == 0.0 || sd == 0.0 {
        0.0
    } else {
        -cfg.target_correlation * (e2 * (kappa * kappa).exp_m1() + e1).sqrt() / (kappa * e1)
    };
    if loading.abs() > 1.0 {
        return Err(Error::Config(format!(
            "target correlation {} is not attainable with tweet_rate {} and rate_sigma {}",
            cfg.target_correlation, cfg.tweet_rate, kappa
        )));
    }
    let mut eta = root.derive(5);
    let lag = cfg.planted_lag_hours;
    let drive: Vec<f64> = (0..h_count)
        .map(|h| {
            let e = eta.normal();
            if h + lag < h_count {
                -loading * vt[h + lag] + (1.0 - loading * loading).sqrt() * e
            } else {
                e
            }
        })
        .collect();

    // Background tweets.
    let mut rng = root.derive(6);
    let mut tweets = Vec::new();
    for t in 0..h_count * BINS_PER_HOUR {
        let mult = (kappa * drive[t / BINS_PER_HOUR] - kappa * kappa / 2.0).exp();
        for c in &centers {
            for _ in 0..rng.poisson(bin_rate(t) * mult) {
                tweets.push(make_tweet(&mut rng, &grid, t, c, cfg.tweet_radius_km, words::background));
            }
        }
    }
    let background_tweets = tweets.len();

    // Keyword bursts.
    let mut rng = root.derive(7);
    let (mut accident_tweets, mut culture_tweets) = (0, 0);
    let mut events = Vec::new();
    for p in &placed {
        let first = p.burst.div_ceil(2);
        let mut tweet_bins = Vec::new();
        for (k, count) in [first, p.burst - first].into_iter().enumerate() {
            let t = p.start_bin + k;
            if count == 0 || t >= n {
                continue;
            }
            let text: fn(&mut RngState) -> String = match p.kind {
                LexiconKind::Accident => words::accident,
                LexiconKind::Culture => words::culture,
            };
            for _ in 0..count {
                tweets.push(make_tweet(&mut rng, &grid, t, &centers[p.segment], cfg.tweet_radius_km, text));
            }
            tweet_bins.push((t, count as u32));
        }
        let total: usize = tweet_bins.iter().map(|&(_, c)| c as usize).sum();
        match p.kind {
            LexiconKind::Accident => accident_tweets += total,
            LexiconKind::Culture => culture_tweets += total,
        }
        events.push(EventRecord {
            kind: p.kind,
            segment_id: centers[p.segment].segment_id,
            start: format_iso(grid.bin_start(p.start_bin)),
            start_bin: p.start_bin,
            drop_start_bin: p.start_bin + p.delay,
            duration_bins: p.duration,
            tps_drop: p.drop,
            tweet_bins,
        });
    }
    tweets.sort_by_key(|t| t.ts);

    let manifest = ScenarioManifest {
        config: cfg.clone(),
        grid,
        centers: centers.clone(),
        events,
        planted: PlantedCorrelation {
            lag_hours: lag,
            target: cfg.target_correlation,
            loading,
            rate_sigma: kappa,
            mean_hourly_rate: e1,
        },
        background_tweets,
        accident_tweets,
        culture_tweets,
    };
    Ok(Scenario {
        traffic,
        tweets,
        centers,
        manifest,
    })
}

fn place_explicit(e: &EventSpec, grid: &TimeGrid) -> Result<Placed> {
    let ts = parse_iso(&e.start).map_err(|err| Error::Config(format!("event start: {err}")))?;
    if ts.rem_euclid(BIN_SECONDS) != 0 {
        return Err(Error::Config(format!("event start {} is not on a 15-minute boundary", e.start)));
    }
    let start_bin = grid
        .bin_of(ts)
        .ok_or_else(|| Error::Config(format!("event start {} outside the scenario", e.start)))?;
    if start_bin + e.delay_bins + e.duration_bins > grid.bins || start_bin + 2 > grid.bins {
        return Err(Error::Config(format!("event at {} runs past the end of the scenario", e.start)));
    }
    Ok(Placed {
        kind: e.kind,
        segment: e.segment,
        start_bin,
        delay: e.delay_bins,
        duration: e.duration_bins,
        drop: e.tps_drop,
        burst: e.burst_tweets,
    })
}

fn make_tweet(
    rng: &mut RngState,
    grid: &TimeGrid,
    bin: usize,
    c: &SegmentCenter,
    radius_km: f64,
    text: fn(&mut RngState) -> String,
) -> TweetRecord {
    let ts = grid.bin_start(bin) + rng.below(BIN_SECONDS as usize) as i64;
    let r = radius_km * rng.uniform().sqrt();
    let (lat, lon) = destination(c.lat, c.lon, r, rng.uniform_range(0.0, 2.0 * PI));
    // Six decimals (about 0.1 m) keep the files compact.
    let round = |v: f64| (v * 1e6).round() / 1e6;
    TweetRecord::new(ts, round(lat), round(lon), text(rng))
}
