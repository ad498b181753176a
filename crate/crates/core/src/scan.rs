//! Exhaustive change-year scan over the RMS-error curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::segfit::{valid_change_range, DualFit, DualFitter};
use crate::series::AnnualSeries;

/// Relative tolerance under which two RMS errors count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Earliest,
    Latest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Years excluded at each end; the first admissible change index equals
    /// the margin, so each segment keeps at least `margin` points.
    pub margin: usize,
    pub tie_break: TieBreak,
    pub closeness_factor: f64,
    /// Allows margins below [`ScanConfig::MIN_MARGIN`]; only meant for
    /// demonstrating the edge pathology on pure noise.
    pub diagnostic: bool,
}

impl ScanConfig {
    pub const DEFAULT_MARGIN: usize = 10;
    pub const MIN_MARGIN: usize = 2;
    pub const DEFAULT_CLOSENESS: f64 = 1.02;

    pub fn with_margin(margin: usize) -> Self {
        Self { margin, ..Self::default() }
    }

    /// Scan with an arbitrary margin, including 0.
    pub fn diagnostic(margin: usize) -> Self {
        Self { margin, diagnostic: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.margin < Self::MIN_MARGIN && !self.diagnostic {
            return Err(Error::config(format!(
                "margin {} below floor {} (use diagnostic mode)",
                self.margin,
                Self::MIN_MARGIN
            )));
        }
        if !(self.closeness_factor >= 1.0) {
            return Err(Error::config(format!(
                "closeness factor {} must be >= 1",
                self.closeness_factor
            )));
        }
        Ok(())
    }

    /// Change indices scanned for a series of length `n`.
    pub fn change_range(&self, n: usize) -> Result<std::ops::RangeInclusive<usize>> {
        let required = (2 * self.margin + 1).max(4);
        if n < required {
            return Err(Error::Length { required, actual: n });
        }
        let valid = valid_change_range(n);
        let lo = self.margin.max(*valid.start());
        let hi = (n - self.margin).min(*valid.end());
        if lo > hi {
            return Err(Error::Length { required: required + 1, actual: n });
        }
        Ok(lo..=hi)
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            margin: Self::DEFAULT_MARGIN,
            tie_break: TieBreak::Earliest,
            closeness_factor: Self::DEFAULT_CLOSENESS,
            diagnostic: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<S> {
    pub change_index: usize,
    pub change_year: i32,
    pub rmse: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult<S> {
    /// RMS error for every scanned change year, in year order.
    pub rmse_curve: Vec<CurvePoint<S>>,
    pub best: DualFit<S>,
    /// Near-optimal relative minima, sorted by RMS error; always contains
    /// the best change year.
    pub candidates: Vec<CurvePoint<S>>,
    pub margin: usize,
}

fn tied<S: Scalar>(a: S, b: S) -> bool {
    (a - b).abs() <= S::lit(TIE_TOLERANCE) * a.abs().max(b.abs())
}

pub fn scan_change_point<S: Scalar>(series: &AnnualSeries<S>, config: &ScanConfig) -> Result<ScanResult<S>> {
    config.validate()?;
    let range = config.change_range(series.len())?;
    let fitter = DualFitter::new(series);
    let fits = range
        .map(|t| fitter.fit_at(t))
        .collect::<Result<Vec<_>>>()?;
    let rmse_curve: Vec<CurvePoint<S>> = fits
        .iter()
        .map(|f| CurvePoint { change_index: f.change_index, change_year: f.change_year, rmse: f.rmse })
        .collect();
    let best_pos = global_minimum(&rmse_curve, config.tie_break);
    let candidates = relative_minima(&rmse_curve, S::lit(config.closeness_factor), config.tie_break);
    Ok(ScanResult { best: fits[best_pos], rmse_curve, candidates, margin: config.margin })
}

/// Position of the smallest RMS error, ties resolved by `tie_break`.
pub fn global_minimum<S: Scalar>(curve: &[CurvePoint<S>], tie_break: TieBreak) -> usize {
    let mut best = 0;
    for (i, p) in curve.iter().enumerate().skip(1) {
        let cur = curve[best].rmse;
        if tied(p.rmse, cur) {
            if tie_break == TieBreak::Latest {
                best = i;
            }
        } else if p.rmse < cur {
            best = i;
        }
    }
    best
}

/// Interior local minima (plateaus count once) within `closeness_factor` of
/// the global minimum, plus the global minimum itself; sorted by RMS error.
pub fn relative_minima<S: Scalar>(
    curve: &[CurvePoint<S>],
    closeness_factor: S,
    tie_break: TieBreak,
) -> Vec<CurvePoint<S>> {
    if curve.is_empty() {
        return Vec::new();
    }
    let global = curve[global_minimum(curve, tie_break)];
    let limit = global.rmse * closeness_factor;
    let mut out = Vec::new();

    let mut i = 0;
    while i < curve.len() {
        // plateau [i, j] of tied values
        let mut j = i;
        while j + 1 < curve.len() && tied(curve[j + 1].rmse, curve[i].rmse) {
            j += 1;
        }
        let v = curve[i].rmse;
        let interior = i > 0 && j + 1 < curve.len();
        if interior && curve[i - 1].rmse > v && curve[j + 1].rmse > v {
            let pick = match tie_break {
                TieBreak::Earliest => curve[i],
                TieBreak::Latest => curve[j],
            };
            if pick.rmse <= limit || tied(pick.rmse, limit) {
                out.push(pick);
            }
        }
        i = j + 1;
    }
    if !out.iter().any(|p| p.change_index == global.change_index) {
        // a global minimum that sits on a plateau is represented by its
        // reported plateau point already
        if !out.iter().any(|p| tied(p.rmse, global.rmse)) {
            out.push(global);
        }
    }
    out.sort_by(|a, b| {
        a.rmse
            .partial_cmp(&b.rmse)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.change_index.cmp(&b.change_index))
    });
    out
}
