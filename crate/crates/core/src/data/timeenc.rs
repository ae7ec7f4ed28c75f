//! Sinusoidal position features, calendar features and their projection.

use chrono::{Datelike, Timelike};

use crate::error::{contract, Result};
use crate::numerics::{matmul_nt, Matrix};
use crate::time::to_datetime;

pub const CALENDAR_DIM: usize = 7;
pub const CALENDAR_NAMES: [&str; CALENDAR_DIM] = ["minute", "hour", "dayofweek", "day", "dayofyear", "month", "weekofyear"];
const CALENDAR_MAX: [f64; CALENDAR_DIM] = [59.0, 23.0, 6.0, 31.0, 366.0, 12.0, 53.0];

/// `(pos, k)`: `sin(pos / 10000^(k/d))` for even `k`, `cos(pos / 10000^((k-1)/d))` for odd.
pub fn sinusoidal_encoding(seq_len: usize, d_tau: usize) -> Result<Matrix> {
    sinusoids_from(0, seq_len, d_tau)
}

/// Same as [`sinusoidal_encoding`] for positions `first..first + len`.
pub fn sinusoids_from(first: usize, len: usize, d_tau: usize) -> Result<Matrix> {
    if d_tau < 2 || d_tau % 2 != 0 {
        return Err(contract(format!("d_tau must be even and at least 2, got {d_tau}")));
    }
    let mut m = Matrix::zeros(len, d_tau);
    for r in 0..len {
        let pos = (first + r) as f64;
        for k in 0..d_tau {
            let e = (k - k % 2) as f64 / d_tau as f64;
            let arg = pos / 10000f64.powf(e);
            m.set(r, k, if k % 2 == 0 { arg.sin() } else { arg.cos() });
        }
    }
    Ok(m)
}

/// Minute, hour, day of week (Monday = 0), day of month, day of year,
/// month and ISO week, each divided by its fixed maximum.
pub fn calendar_features(ts: i64) -> Result<[f64; CALENDAR_DIM]> {
    let d = to_datetime(ts)?;
    let raw = [
        d.minute() as f64,
        d.hour() as f64,
        d.weekday().num_days_from_monday() as f64,
        d.day() as f64,
        d.ordinal() as f64,
        d.month() as f64,
        d.iso_week().week() as f64,
    ];
    Ok(std::array::from_fn(|i| raw[i] / CALENDAR_MAX[i]))
}

pub fn calendar_matrix(timestamps: &[i64]) -> Result<Matrix> {
    let mut data = Vec::with_capacity(timestamps.len() * CALENDAR_DIM);
    for &ts in timestamps {
        data.extend(calendar_features(ts)?);
    }
    Matrix::from_vec(timestamps.len(), CALENDAR_DIM, data)
}

/// Rows `W · (embedding ⊕ τ ⊕ T)` for `W` of shape `d × (2d + 7)`.
pub fn encode_input(embedding: &Matrix, tau: &Matrix, time: &Matrix, w: &Matrix) -> Result<Matrix> {
    let d = embedding.cols();
    if w.shape() != (d, 2 * d + CALENDAR_DIM) {
        return Err(contract(format!("projection is {:?}, expected ({d}, {})", w.shape(), 2 * d + CALENDAR_DIM)));
    }
    if tau.cols() != d || time.cols() != CALENDAR_DIM {
        return Err(contract("sinusoid or calendar width does not match the projection"));
    }
    let cat = Matrix::concat_cols(&[embedding, tau, time])?;
    matmul_nt(&cat, w)
}
