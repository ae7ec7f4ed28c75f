//! File formats: tweets JSON-lines, segment/site/traffic/feature CSVs and
//! pretty JSON documents.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::{TrafficTensor, TRAFFIC_CHANNELS};
use crate::error::{Error, Result};
use crate::text::{SegmentCenter, SegmentFeatureSeries, TweetRecord};
use crate::time::{format_iso, parse_iso, TimeGrid, BIN_SECONDS};

pub const TRAFFIC_HEADER: [&str; 5] = ["segment_id", "bin_start_iso8601", "tps", "volume", "speed"];
pub const FEATURES_HEADER: [&str; 5] = ["segment_id", "bin_start_iso8601", "term_freq", "accident_count", "culture_count"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Writes `header` and `rows` as CSV. Fields are written verbatim.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(AsRef::as_ref))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tweets_jsonl(path: &Path, tweets: &[TweetRecord]) -> Result<()> {
    let mut w = create(path)?;
    for t in tweets {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Blank lines are skipped; anything else must be a tweet object.
pub fn read_tweets_jsonl(path: &Path) -> Result<Vec<TweetRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TweetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        t.validate().map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

fn records(path: &Path, expect: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != expect {
        return Err(Error::Parse {
            line: 1,
            message: format!("{}: expected header {}", path.display(), expect.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|e| Error::Parse {
        line,
        message: format!("field {} ({raw:?}): {e}", i + 1),
    })
}

pub fn write_segments_csv(path: &Path, centers: &[SegmentCenter]) -> Result<()> {
    write_csv(
        path,
        &["segment_id", "lat", "lon"],
        centers
            .iter()
            .map(|c| vec![c.segment_id.to_string(), c.lat.to_string(), c.lon.to_string()]),
    )
}

pub fn read_segments_csv(path: &Path) -> Result<Vec<SegmentCenter>> {
    let mut out: Vec<SegmentCenter> = Vec::new();
    for (line, rec) in records(path, &["segment_id", "lat", "lon"])? {
        let c = SegmentCenter {
            segment_id: field(&rec, 0, line)?,
            lat: field(&rec, 1, line)?,
            lon: field(&rec, 2, line)?,
        };
        if out.iter().any(|o| o.segment_id == c.segment_id) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate segment {}", c.segment_id),
            });
        }
        out.push(c);
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{} lists no segments", path.display())));
    }
    Ok(out)
}

/// `site,segment_id` rows; each site maps to one segment.
pub fn read_site_map_csv(path: &Path) -> Result<HashMap<String, u32>> {
    let mut out = HashMap::new();
    for (line, rec) in records(path, &["site", "segment_id"])? {
        let site = rec.get(0).unwrap_or("").to_string();
        if out.insert(site.clone(), field(&rec, 1, line)?).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("site {site:?} listed twice"),
            });
        }
    }
    Ok(out)
}

/// Rows keyed by `(segment, timestamp)` covering a complete grid.
struct GridTable {
    grid: TimeGrid,
    segment_ids: Vec<u32>,
    values: Vec<Vec<f64>>, // [segment][bin * width + k]
}

fn read_grid_table(path: &Path, header: &[&str]) -> Result<GridTable> {
    let width = header.len() - 2;
    let mut rows: BTreeMap<u32, BTreeMap<i64, (usize, Vec<f64>)>> = BTreeMap::new();
    for (line, rec) in records(path, header)? {
        let seg: u32 = field(&rec, 0, line)?;
        let ts = parse_iso(rec.get(1).unwrap_or("")).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if ts.rem_euclid(BIN_SECONDS) != 0 {
            return Err(Error::Parse {
                line,
                message: format!("{} is not on a 15-minute boundary", format_iso(ts)),
            });
        }
        let vals = (0..width).map(|k| field(&rec, k + 2, line)).collect::<Result<Vec<f64>>>()?;
        if rows.entry(seg).or_default().insert(ts, (line, vals)).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate row for segment {seg} at {}", format_iso(ts)),
            });
        }
    }
    let first = rows
        .values()
        .next()
        .ok_or_else(|| Error::Config(format!("{} has no data rows", path.display())))?;
    let start = *first.keys().next().expect("non-empty");
    let end = *first.keys().next_back().expect("non-empty");
    let bins = ((end - start) / BIN_SECONDS) as usize + 1;
    let grid = TimeGrid::new(start, bins)?;
    let mut values = Vec::new();
    for (seg, series) in &rows {
        if series.len() != bins || series.keys().next() != Some(&start) || series.keys().next_back() != Some(&end) {
            return Err(Error::Alignment(format!(
                "segment {seg} does not cover the full grid {} .. {} ({} bins)",
                format_iso(start),
                format_iso(end),
                bins
            )));
        }
        values.push(series.values().flat_map(|(_, v)| v.iter().copied()).collect());
    }
    Ok(GridTable {
        grid,
        segment_ids: rows.keys().copied().collect(),
        values,
    })
}

/// Segment-major rows. Segments keep the tensor's order.
pub fn write_traffic_csv(path: &Path, x: &TrafficTensor) -> Result<()> {
    let rows = (0..x.segments()).flat_map(|m| {
        (0..x.steps()).map(move |t| {
            let mut r = vec![x.segment_ids[m].to_string(), format_iso(x.grid.bin_start(t))];
            r.extend((0..TRAFFIC_CHANNELS).map(|k| x.get(t, m, k).to_string()));
            r
        })
    });
    write_csv(path, &TRAFFIC_HEADER, rows)
}

/// Segments come back sorted by id. Every segment must cover the same
/// contiguous grid.
pub fn read_traffic_csv(path: &Path) -> Result<TrafficTensor> {
    let table = read_grid_table(path, &TRAFFIC_HEADER)?;
    let (n, m) = (table.grid.bins, table.segment_ids.len());
    let mut data = vec![0.0; n * m * TRAFFIC_CHANNELS];
    for (s, vals) in table.values.iter().enumerate() {
        for t in 0..n {
            for k in 0..TRAFFIC_CHANNELS {
                data[(t * m + s) * TRAFFIC_CHANNELS + k] = vals[t * TRAFFIC_CHANNELS + k];
            }
        }
    }
    TrafficTensor::new(table.grid, table.segment_ids, data)
}

pub fn write_features_csv(path: &Path, series: &[SegmentFeatureSeries]) -> Result<()> {
    let rows = series.iter().flat_map(|s| {
        (0..s.grid.bins).map(move |t| {
            vec![
                s.segment_id.to_string(),
                format_iso(s.grid.bin_start(t)),
                s.term_frequency[t].to_string(),
                s.accident_count[t].to_string(),
                s.culture_count[t].to_string(),
            ]
        })
    });
    write_csv(path, &FEATURES_HEADER, rows)
}

pub fn read_features_csv(path: &Path) -> Result<Vec<SegmentFeatureSeries>> {
    let table = read_grid_table(path, &FEATURES_HEADER)?;
    let count = |v: f64| -> Result<u32> {
        if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
            return Err(Error::Config(format!("keyword count {v} is not a nonnegative integer")));
        }
        Ok(v as u32)
    };
    table
        .segment_ids
        .iter()
        .zip(&table.values)
        .map(|(&id, vals)| {
            let mut s = SegmentFeatureSeries::zeros(id, table.grid);
            for t in 0..table.grid.bins {
                s.term_frequency[t] = vals[t * 3];
                s.accident_count[t] = count(vals[t * 3 + 1])?;
                s.culture_count[t] = count(vals[t * 3 + 2])?;
            }
            Ok(s)
        })
        .collect()
}
