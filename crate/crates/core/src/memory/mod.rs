//! Long-memory parameters and trend uncertainty.
//!
//! Trend-estimator variance under fractionally integrated noise with an
//! AR(1)-like short-range component follows the asymptotic law
//! `σ²[m̂] = σ² · f(φ, d) · N^(2d − 3)`. This module estimates `d` (DFA) and
//! `φ` (fractional differencing followed by the lag-1 autocorrelation),
//! evaluates `f` with the special functions it needs, and produces
//! moving-window trends with error bars.

mod dfa;
mod fracdiff;
mod special;
mod trend;

pub use dfa::{default_scales, dfa_estimate, DfaResult};
pub use fracdiff::{estimate_phi, gl_fractional_diff, gl_weights};
pub use special::{f_factor, gamma_function, hyp2f1, hyp2f1_1d, SeriesValue};
pub use trend::{estimate_memory, moving_window_trends, trend_variance, MemoryParams, TrendAnalysis, TrendWindow};
