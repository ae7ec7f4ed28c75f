//! The traffic/tweet correlation study: seasonal detrending, Pearson and
//! lagged cross-correlation, and the lag-1 regression with p-values.

pub mod corr;
pub mod ols;
pub mod trend;

pub use corr::{cross_correlation, pearson};
pub use ols::{lagged_design, ols_fit, student_t_sf, two_sided_p, OlsResult, LAGGED_TERMS};
pub use trend::{aggregate_hourly, compute_trend, detrend, fill_gaps, hour_dow, HourlySeries, TrendTable};
