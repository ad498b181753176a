//! Single change-point detection in the linear trend of annual series.
//!
//! A two-segment continuous least-squares fit is evaluated in closed form at
//! every admissible change year; the year with minimal RMS error wins. The
//! dual-linear model is weighed against a single line by BIC and by a Monte
//! Carlo slope-gap test, trend uncertainty under long-range-correlated noise
//! is quantified, and gridded datasets are processed cell by cell.
//!
//! The fitting core ([`segfit`], [`scan`], [`selection`]) is generic over
//! [`Scalar`] (`f32` or `f64`); the `f64` aliases below are what the rest of
//! the crate uses.

pub mod error;
pub mod grid;
pub mod memory;
pub mod rng;
pub mod scalar;
pub mod scan;
pub mod segfit;
pub mod selection;
pub mod series;
pub mod series_csv;
pub mod sigtest;
pub mod stochastic;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use series::AnnualSeries;
pub use series_csv::{read_series_csv, write_series_csv};

pub type Series = series::AnnualSeries<f64>;
pub type LinearFit = segfit::LinearFit<f64>;
pub type DualFit = segfit::DualFit<f64>;
pub type ScanResult = scan::ScanResult<f64>;
pub type ModelSelection = selection::ModelSelection<f64>;

pub use scan::{scan_change_point, ScanConfig, TieBreak};
pub use segfit::{fit_dual_at, fit_single, solve_constraint_system};
pub use selection::{information_criteria, select_model, Model};
pub use grid::{batch_analyze, global_mean_series, load_grid, summarize_area, BatchConfig, CellResult, GridDataset, GridFormat};
