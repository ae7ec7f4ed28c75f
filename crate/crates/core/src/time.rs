//! The 15-minute time grid shared by traffic and tweet channels.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

pub const BIN_SECONDS: i64 = 900;
pub const BINS_PER_HOUR: usize = 4;
pub const BINS_PER_DAY: usize = 96;

/// Contiguous run of `bins` 15-minute bins starting at `start`
/// (UTC epoch seconds, aligned to a bin boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: i64,
    pub bins: usize,
}

impl TimeGrid {
    pub fn new(start: i64, bins: usize) -> Result<Self> {
        if start.rem_euclid(BIN_SECONDS) != 0 {
            return Err(contract(format!("grid start {start} is not on a 15-minute boundary")));
        }
        Ok(Self { start, bins })
    }

    pub fn end(&self) -> i64 {
        self.start + self.bins as i64 * BIN_SECONDS
    }

    pub fn bin_start(&self, bin: usize) -> i64 {
        self.start + bin as i64 * BIN_SECONDS
    }

    /// Bin containing `ts`, if inside the grid.
    pub fn bin_of(&self, ts: i64) -> Option<usize> {
        if ts < self.start || ts >= self.end() {
            return None;
        }
        Some(((ts - self.start) / BIN_SECONDS) as usize)
    }

    pub fn slice(&self, from: usize, bins: usize) -> TimeGrid {
        TimeGrid {
            start: self.bin_start(from),
            bins,
        }
    }
}

pub fn to_datetime(ts: i64) -> Result<DateTime<Utc>> {
    DateTime::from_timestamp(ts, 0).ok_or_else(|| contract(format!("timestamp {ts} out of range")))
}

/// `YYYY-MM-DDTHH:MM:SSZ`
pub fn format_iso(ts: i64) -> String {
    to_datetime(ts)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|_| ts.to_string())
}

pub fn parse_iso(s: &str) -> Result<i64> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|d| d.timestamp())
        .map_err(|e| Error::Parse {
            line: 0,
            message: format!("bad timestamp {s:?}: {e}"),
        })
}
