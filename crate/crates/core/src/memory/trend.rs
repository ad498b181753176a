use serde::{Deserialize, Serialize};

use super::dfa::dfa_estimate;
use super::fracdiff::estimate_phi;
use super::special::f_factor;
use crate::error::{Error, Result};
use crate::segfit::{fit_line, fit_single};
use crate::series::AnnualSeries;

/// Noise description feeding the trend-variance law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Long-memory exponent, `H − 1/2`, in (−0.5, 0.5).
    pub d: f64,
    /// Short-range AR parameter in (−1, 1).
    pub phi: f64,
    /// Variance of the series (after trend removal).
    pub sigma2: f64,
    /// How each value was obtained.
    pub notes: Vec<String>,
}

impl MemoryParams {
    pub fn new(d: f64, phi: f64, sigma2: f64) -> Result<Self> {
        let p = Self { d, phi, sigma2, notes: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn white(sigma2: f64) -> Self {
        Self { d: 0.0, phi: 0.0, sigma2, notes: vec!["white noise assumed".into()] }
    }

    pub fn hurst(&self) -> f64 {
        self.d + 0.5
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.abs() < 0.5) {
            return Err(Error::domain(format!("d = {} outside (-0.5, 0.5)", self.d)));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::domain(format!("phi = {} outside (-1, 1)", self.phi)));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::domain(format!("sigma2 = {} must be positive", self.sigma2)));
        }
        Ok(())
    }
}

/// Slope estimate on one moving window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendWindow {
    pub first_year: i32,
    pub center_year: f64,
    pub window_length: usize,
    pub slope: f64,
    /// Standard deviation of the slope estimator (full width, not halved).
    pub sigma_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendAnalysis {
    pub params: MemoryParams,
    pub windows: Vec<TrendWindow>,
}

/// Asymptotic variance of the least-squares slope on `n` points:
/// `sigma2 · f(φ, d) · n^(2d − 3)`.
pub fn trend_variance(sigma2: f64, phi: f64, d: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Length { required: 3, actual: n });
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::domain(format!("variance {sigma2} must be non-negative")));
    }
    Ok(sigma2 * f_factor(phi, d)? * (n as f64).powf(2.0 * d - 3.0))
}

const D_LIMIT: f64 = 0.49;

/// Estimates `(d, φ, σ²)` from the residuals of a single-line fit.
///
/// `d` comes from order-1 DFA, clamped to ±0.49; series too short for DFA
/// fall back to `d = 0`. `φ` is estimated after differencing by
/// `max(d, 0)`.
pub fn estimate_memory(series: &AnnualSeries<f64>) -> Result<MemoryParams> {
    let line = fit_single(series)?;
    let resid: Vec<f64> = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| x - line.predict(i + 1))
        .collect();
    let n = resid.len();
    let sigma2 = line.rss / (n as f64 - 2.0).max(1.0);
    let mut notes = vec![format!("sigma2 from single-line residuals, {} dof", n.saturating_sub(2))];

    let d = match dfa_estimate(&resid, 1, None) {
        Ok(r) => {
            let clamped = r.d.clamp(-D_LIMIT, D_LIMIT);
            notes.push(format!(
                "d from DFA-1 over scales {}..{} (H = {:.4}, r2 = {:.4})",
                r.scales[0],
                r.scales[r.scales.len() - 1],
                r.hurst,
                r.r_squared
            ));
            if clamped != r.d {
                notes.push(format!("d clamped from {:.4}", r.d));
            }
            clamped
        }
        Err(e) => {
            notes.push(format!("DFA unavailable ({e}); d = 0 assumed"));
            0.0
        }
    };
    let phi = estimate_phi(&resid, d.max(0.0))?;
    notes.push(format!(
        "phi from lag-1 autocorrelation after fractional differencing by {:.4}, demeaned",
        d.max(0.0)
    ));
    let params = MemoryParams { d, phi, sigma2, notes };
    params.validate()?;
    Ok(params)
}

/// OLS slopes on every full window of `window_length` years (stride one)
/// with asymptotic error bars.
///
/// Each window's variance is its own residual variance (`L − 2` dof); `d`
/// and `φ` come from `params` or, when absent, from [`estimate_memory`] on
/// the whole series.
pub fn moving_window_trends(
    series: &AnnualSeries<f64>,
    window_length: usize,
    params: Option<MemoryParams>,
) -> Result<TrendAnalysis> {
    let n = series.len();
    if window_length > n {
        return Err(Error::Length { required: window_length, actual: n });
    }
    if window_length < 3 {
        return Err(Error::config(format!("window length {window_length} below 3")));
    }
    let params = match params {
        Some(p) => p,
        None => estimate_memory(series)?,
    };
    let values = series.values();
    let windows = (0..=n - window_length)
        .map(|start| {
            let fit = fit_line(&values[start..start + window_length])?;
            let var = fit.rss / (window_length - 2) as f64;
            let sigma = trend_variance(var, params.phi, params.d, window_length)?.sqrt();
            let first_year = series.year_of(start + 1);
            Ok(TrendWindow {
                first_year,
                center_year: first_year as f64 + (window_length as f64 - 1.0) / 2.0,
                window_length,
                slope: fit.slope,
                sigma_slope: sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrendAnalysis { params, windows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_variance_values() {
        let v = trend_variance(1.0, 0.0, 0.0, 100).unwrap();
        assert!((v - 1.2e-5).abs() < 1e-15);
        let v1 = trend_variance(2.0, 0.3, 0.0, 40).unwrap();
        let v2 = trend_variance(2.0, 0.3, 0.0, 80).unwrap();
        assert!((v1 / v2 - 8.0).abs() < 1e-10);
    }

    #[test]
    fn long_memory_exponent_ratio() {
        let a = trend_variance(1.0, 0.5, 0.29, 20).unwrap();
        let b = trend_variance(1.0, 0.5, 0.29, 10).unwrap();
        let expect = 2f64.powf(2.0 * 0.29 - 3.0);
        assert!((a / b - expect).abs() < 1e-12);
        assert!((expect - 0.186).abs() < 1e-3);
    }

    #[test]
    fn variance_positive_on_lattice() {
        for i in 0..9 {
            let d = -0.4 + 0.1 * i as f64;
            for j in 0..19 {
                let phi = -0.9 + 0.1 * j as f64;
                let v = trend_variance(0.7, phi, d, 25).unwrap();
                assert!(v > 0.0 && v.is_finite(), "d={d} phi={phi}");
            }
        }
    }

    #[test]
    fn exact_line_windows() {
        let s = AnnualSeries::new(1950, (0..40).map(|t| 1.0 + 0.03 * t as f64).collect()).unwrap();
        let a = moving_window_trends(&s, 10, Some(MemoryParams::white(1.0))).unwrap();
        assert_eq!(a.windows.len(), 31);
        for w in &a.windows {
            assert!((w.slope - 0.03).abs() < 1e-12);
        }
        assert_eq!(a.windows[0].center_year, 1954.5);
        assert!(moving_window_trends(&s, 41, None).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MemoryParams::new(0.5, 0.0, 1.0).is_err());
        assert!(MemoryParams::new(0.2, 1.0, 1.0).is_err());
        assert!(MemoryParams::new(0.2, 0.1, 0.0).is_err());
        assert!((MemoryParams::new(0.15, 0.0, 1.0).unwrap().hurst() - 0.65).abs() < 1e-15);
    }
}
