//! Monte Carlo test of "no trend change" using the slope gap `|a1 − a2|`.
//!
//! The null ensemble is a parametric bootstrap: the single-line fit of the
//! observed series plus synthetic noise whose standard deviation is that of
//! the best two-segment fit's residuals (`N − 4` dof). Each surrogate is
//! scanned exactly like the observation, and the one-sided quantile of the
//! surrogate slope gaps is taken conditional on where the surrogate's change
//! point landed, since gaps found near the ends of the record run larger.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::memory::dfa_estimate;
use crate::rng::{self, Purpose};
use crate::scan::{scan_change_point, ScanConfig, ScanResult};
use crate::segfit::{fit_single, DualFit};
use crate::series::AnnualSeries;
use crate::stochastic::{NoiseKind, NoiseSource};

pub const MIN_ENSEMBLE: usize = 200;

/// Noise model of the null surrogates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NullNoise {
    White,
    /// ARFIMA(0, d, 0); `d = None` estimates it from the residuals by DFA.
    Arfima { d: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigConfig {
    pub ensemble_size: usize,
    pub noise: NullNoise,
    pub seed: u64,
    pub confidence: f64,
    pub bin_width: usize,
    pub min_bin_samples: usize,
    pub scan: ScanConfig,
    pub workers: Option<usize>,
}

impl Default for SigConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 1000,
            noise: NullNoise::White,
            seed: 0,
            confidence: 0.95,
            bin_width: 5,
            min_bin_samples: 50,
            scan: ScanConfig::default(),
            workers: None,
        }
    }
}

impl SigConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < MIN_ENSEMBLE {
            return Err(Error::config(format!(
                "ensemble size {} below minimum {MIN_ENSEMBLE}",
                self.ensemble_size
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::config(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        if self.bin_width == 0 {
            return Err(Error::config("bin width must be positive"));
        }
        if let NullNoise::Arfima { d: Some(d) } = self.noise {
            NoiseKind::Arfima { d }.validate()?;
        }
        self.scan.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSample {
    pub change_index: usize,
    pub change_year: i32,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullEnsemble {
    pub samples: Vec<NullSample>,
    /// Residual standard deviation used for the surrogates.
    pub sigma: f64,
    pub noise: NoiseKind,
    /// First scanned change index, the origin of the bins.
    pub first_index: usize,
    pub last_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub s_obs: f64,
    pub change_year_obs: i32,
    pub change_index_obs: usize,
    /// One-sided quantile of the conditional null distribution.
    pub threshold: f64,
    pub reject: bool,
    pub ensemble_size: usize,
    pub confidence: f64,
    pub bin_width: usize,
    /// Change years spanned by the pooled bins.
    pub pooled_years: (i32, i32),
    pub pooled_samples: usize,
    /// Set when pooling every bin still left too few samples and the
    /// unconditional quantile was used.
    pub unconditional_fallback: bool,
    pub null_sigma: f64,
    pub null_noise: NoiseKind,
}

pub fn slope_gap(fit: &DualFit<f64>) -> f64 {
    fit.slope_gap()
}

/// Residual standard deviation of the dual fit and the residuals themselves.
fn noise_scale(series: &AnnualSeries<f64>, best: &DualFit<f64>) -> (f64, Vec<f64>) {
    let n = series.len();
    let sigma = (best.rss / (n as f64 - 4.0).max(1.0)).sqrt();
    let residuals = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| x - best.predict(i + 1))
        .collect();
    (sigma, residuals)
}

fn resolve_noise(noise: NullNoise, residuals: &[f64]) -> Result<NoiseKind> {
    Ok(match noise {
        NullNoise::White => NoiseKind::White,
        NullNoise::Arfima { d: Some(d) } => NoiseKind::Arfima { d },
        NullNoise::Arfima { d: None } => {
            let d = dfa_estimate(residuals, 1, None)
                .map(|r| r.d.clamp(-0.45, 0.45))
                .unwrap_or(0.0);
            NoiseKind::Arfima { d }
        }
    })
}

/// Detected change point and slope gap for every null surrogate.
pub fn null_ensemble(series: &AnnualSeries<f64>, config: &SigConfig) -> Result<NullEnsemble> {
    config.validate()?;
    let n = series.len();
    let range = config.scan.change_range(n)?;
    let line = fit_single(series)?;
    let observed = scan_change_point(series, &config.scan)?;
    let (sigma, residuals) = noise_scale(series, &observed.best);
    let noise = resolve_noise(config.noise, &residuals)?;
    let source = NoiseSource::new(noise, n)?;

    let one = |i: usize| -> Result<NullSample> {
        let mut r = rng::stream(config.seed, Purpose::NullSurrogate, i as u64);
        let eps = source.sample(&mut r, n, sigma);
        let values = eps.into_iter().enumerate().map(|(k, e)| line.predict(k + 1) + e).collect();
        let surrogate = AnnualSeries::new(series.start_year(), values)?;
        let best = scan_change_point(&surrogate, &config.scan)?.best;
        Ok(NullSample { change_index: best.change_index, change_year: best.change_year, s: best.slope_gap() })
    };
    let samples = rng::with_workers(config.workers, || {
        (0..config.ensemble_size).into_par_iter().map(one).collect::<Result<Vec<_>>>()
    })?;
    Ok(NullEnsemble { samples, sigma, noise, first_index: *range.start(), last_index: *range.end() })
}

/// Smallest sample value whose empirical CDF reaches `level`.
pub fn upper_quantile(values: &mut [f64], level: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    let k = ((level * m as f64).ceil() as usize).clamp(1, m);
    values[k - 1]
}

/// Conditional threshold from a null ensemble whose slope gaps are
/// multiplied by `scale`.
fn conditional_threshold(
    null: &NullEnsemble,
    scale: f64,
    change_index: usize,
    config: &SigConfig,
    start_year: i32,
) -> (f64, (i32, i32), usize, bool) {
    let bin_of = |t: usize| (t.saturating_sub(null.first_index)) / config.bin_width;
    let last_bin = bin_of(null.last_index);
    let centre = bin_of(change_index).min(last_bin);
    let mut radius = 0;
    loop {
        let lo = centre.saturating_sub(radius);
        let hi = (centre + radius).min(last_bin);
        let mut pooled: Vec<f64> = null
            .samples
            .iter()
            .filter(|s| (lo..=hi).contains(&bin_of(s.change_index)))
            .map(|s| s.s * scale)
            .collect();
        let covers_all = lo == 0 && hi == last_bin;
        if pooled.len() >= config.min_bin_samples || covers_all {
            let fallback = pooled.len() < config.min_bin_samples;
            if fallback {
                pooled = null.samples.iter().map(|s| s.s * scale).collect();
            }
            let year = |b: usize| start_year + (null.first_index + b * config.bin_width) as i32 - 1;
            let span = (year(lo), (year(hi) + config.bin_width as i32 - 1).min(start_year + null.last_index as i32 - 1));
            let n = pooled.len();
            return (upper_quantile(&mut pooled, config.confidence), span, n, fallback);
        }
        radius += 1;
    }
}

fn decide(
    scan: &ScanResult<f64>,
    null: &NullEnsemble,
    scale: f64,
    config: &SigConfig,
    start_year: i32,
) -> SignificanceResult {
    let s_obs = scan.best.slope_gap();
    let (threshold, pooled_years, pooled_samples, fallback) =
        conditional_threshold(null, scale, scan.best.change_index, config, start_year);
    SignificanceResult {
        s_obs,
        change_year_obs: scan.best.change_year,
        change_index_obs: scan.best.change_index,
        threshold,
        reject: s_obs > threshold,
        ensemble_size: null.samples.len(),
        confidence: config.confidence,
        bin_width: config.bin_width,
        pooled_years,
        pooled_samples,
        unconditional_fallback: fallback,
        null_sigma: null.sigma * scale,
        null_noise: null.noise,
    }
}

pub fn test_change_point(series: &AnnualSeries<f64>, config: &SigConfig) -> Result<SignificanceResult> {
    let null = null_ensemble(series, config)?;
    test_against(series, &null, config)
}

/// Decision for `series` against a null ensemble built for it by
/// [`null_ensemble`] with the same `config`.
pub fn test_against(series: &AnnualSeries<f64>, null: &NullEnsemble, config: &SigConfig) -> Result<SignificanceResult> {
    let scan = scan_change_point(series, &config.scan)?;
    Ok(decide(&scan, null, 1.0, config, series.start_year()))
}

/// White-noise null ensemble for unit variance and zero trend.
///
/// The two-segment fit is affine-equivariant: adding a line to the data adds
/// it to both segments, and scaling the data scales both slopes. A white
/// null for any series of the same length is therefore this table with the
/// slope gaps multiplied by the series' residual standard deviation, which
/// lets a whole grid share one ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitNull {
    pub n: usize,
    pub ensemble: NullEnsemble,
    pub config: SigConfig,
}

impl UnitNull {
    pub fn new(n: usize, config: &SigConfig) -> Result<Self> {
        let config = SigConfig { noise: NullNoise::White, ..config.clone() };
        config.validate()?;
        let range = config.scan.change_range(n)?;
        let one = |i: usize| -> Result<NullSample> {
            let mut r = rng::stream(config.seed, Purpose::NullSurrogate, i as u64);
            let surrogate = AnnualSeries::new(0, crate::stochastic::normal_vec(&mut r, n, 1.0))?;
            let best = scan_change_point(&surrogate, &config.scan)?.best;
            Ok(NullSample { change_index: best.change_index, change_year: best.change_year, s: best.slope_gap() })
        };
        let samples = rng::with_workers(config.workers, || {
            (0..config.ensemble_size).into_par_iter().map(one).collect::<Result<Vec<_>>>()
        })?;
        let ensemble = NullEnsemble {
            samples,
            sigma: 1.0,
            noise: NoiseKind::White,
            first_index: *range.start(),
            last_index: *range.end(),
        };
        Ok(Self { n, ensemble, config })
    }

    /// Significance of an already computed scan of `series`.
    pub fn test(&self, series: &AnnualSeries<f64>, scan: &ScanResult<f64>) -> Result<SignificanceResult> {
        if series.len() != self.n {
            return Err(Error::domain(format!(
                "null table built for length {}, series has {}",
                self.n,
                series.len()
            )));
        }
        let (sigma, _) = noise_scale(series, &scan.best);
        Ok(decide(scan, &self.ensemble, sigma, &self.config, series.start_year()))
    }
}
