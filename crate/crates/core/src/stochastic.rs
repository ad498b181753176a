//! Synthetic annual series and ensemble experiments.
//!
//! Noise is either white Gaussian or ARFIMA(0, d, 0), generated as a
//! truncated MA(∞) filter of Gaussian innovations and rescaled so the
//! marginal standard deviation equals `sigma`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scan::{scan_change_point, ScanConfig};
use crate::selection::{select_model, Model};
use crate::series::AnnualSeries;
use crate::sigtest::{test_change_point, SigConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Arfima { d: f64 },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        if let NoiseKind::Arfima { d } = *self {
            if !(d.abs() < 0.5) {
                return Err(Error::domain(format!("ARFIMA d = {d} outside (-0.5, 0.5)")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            NoiseKind::White => "white".into(),
            NoiseKind::Arfima { d } => format!("arfima(d={d})"),
        }
    }
}

/// Parameters of one synthetic series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start_year: i32,
    pub n_years: usize,
    /// Time index of the trend change; `None` for a single trend.
    pub change_index: Option<usize>,
    /// Slope before the change (or the only slope), unit/year.
    pub slope1: f64,
    /// Slope after the change, unit/year.
    pub slope2: f64,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// 70 years, flat until year 35 then 0.04/yr, σ = 0.45, white noise.
    fn default() -> Self {
        Self {
            start_year: 1,
            n_years: 70,
            change_index: Some(35),
            slope1: 0.0,
            slope2: 0.04,
            sigma: 0.45,
            noise: NoiseKind::White,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn no_change() -> Self {
        Self { change_index: None, slope2: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_years < AnnualSeries::<f64>::MIN_LEN {
            return Err(Error::Length { required: AnnualSeries::<f64>::MIN_LEN, actual: self.n_years });
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(t) = self.change_index {
            if t == 0 || t >= self.n_years {
                return Err(Error::config(format!("change index {t} outside 1..{}", self.n_years)));
            }
        }
        if !self.slope1.is_finite() || !self.slope2.is_finite() {
            return Err(Error::config("slopes must be finite"));
        }
        self.noise.validate()
    }

    /// Noise-free trend at time index `t` (1-based). Zero at the change
    /// index; continuous there.
    pub fn trend(&self, t: usize) -> f64 {
        match self.change_index {
            Some(c) if t <= c => self.slope1 * (t as f64 - c as f64),
            Some(c) => self.slope2 * (t - c) as f64,
            None => self.slope1 * t as f64,
        }
    }

    pub fn change_year(&self) -> Option<i32> {
        self.change_index.map(|c| self.start_year + c as i32 - 1)
    }
}

pub(crate) fn normal_vec<R: Rng>(rng: &mut R, n: usize, sigma: f64) -> Vec<f64> {
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// i.i.d. `N(0, sigma²)` values.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    normal_vec(&mut rng::stream(seed, Purpose::Synthetic, 0), n, sigma)
}

/// MA(∞) weights of `(1 − B)^(−d)`: `ψ_0 = 1`, `ψ_j = ψ_{j−1}(j − 1 + d)/j`.
pub fn arfima_weights(d: f64, len: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(len);
    if len > 0 {
        psi.push(1.0);
    }
    for j in 1..len {
        let prev = psi[j - 1];
        psi.push(prev * (j as f64 - 1.0 + d) / j as f64);
    }
    psi
}

/// Minimum MA truncation length.
pub const MIN_TRUNCATION: usize = 1000;

/// Reusable ARFIMA(0, d, 0) path generator for a fixed length and `d`.
///
/// The first `n` innovations drawn are the contemporaneous ones, followed by
/// `L − 1` pre-sample innovations, so with `d = 0` the output coincides with
/// [`gaussian_noise`] for the same stream.
pub struct ArfimaGenerator {
    n: usize,
    d: f64,
    lags: usize,
    /// `1 / sqrt(Σ ψ_j²)` over the truncated filter.
    norm: f64,
    conv: Option<Convolver>,
}

struct Convolver {
    size: usize,
    kernel: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ArfimaGenerator {
    pub fn new(n: usize, d: f64) -> Result<Self> {
        NoiseKind::Arfima { d }.validate()?;
        let lags = n.max(MIN_TRUNCATION);
        let psi = arfima_weights(d, lags);
        let norm = 1.0 / psi.iter().map(|p| p * p).sum::<f64>().sqrt();
        let conv = (d != 0.0).then(|| {
            let size = (n + 2 * lags - 2).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut kernel: Vec<Complex<f64>> = psi.iter().map(|&p| Complex::new(p, 0.0)).collect();
            kernel.resize(size, Complex::new(0.0, 0.0));
            forward.process(&mut kernel);
            Convolver { size, kernel, forward, inverse }
        });
        Ok(Self { n, d, lags, norm, conv })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn generate<R: Rng>(&self, rng: &mut R, sigma: f64) -> Vec<f64> {
        let current = normal_vec(rng, self.n, 1.0);
        let Some(conv) = &self.conv else {
            return current.into_iter().map(|e| sigma * e).collect();
        };
        let presample = normal_vec(rng, self.lags - 1, 1.0);
        // u[k] = e_{k − (L − 1)}: pre-sample innovations reversed, then current
        let mut buf: Vec<Complex<f64>> = presample
            .iter()
            .rev()
            .chain(current.iter())
            .map(|&e| Complex::new(e, 0.0))
            .collect();
        buf.resize(conv.size, Complex::new(0.0, 0.0));
        conv.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&conv.kernel) {
            *b *= k;
        }
        conv.inverse.process(&mut buf);
        let scale = sigma * self.norm / conv.size as f64;
        buf[self.lags - 1..self.lags - 1 + self.n].iter().map(|c| c.re * scale).collect()
    }
}

/// ARFIMA(0, d, 0) noise with marginal standard deviation `sigma`.
pub fn arfima_noise(n: usize, d: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let generator = ArfimaGenerator::new(n, d)?;
    Ok(generator.generate(&mut rng::stream(seed, Purpose::Synthetic, 0), sigma))
}

/// Noise source for many paths of one length.
pub(crate) enum NoiseSource {
    White,
    Arfima(ArfimaGenerator),
}

impl NoiseSource {
    pub(crate) fn new(kind: NoiseKind, n: usize) -> Result<Self> {
        Ok(match kind {
            NoiseKind::White => NoiseSource::White,
            NoiseKind::Arfima { d } => NoiseSource::Arfima(ArfimaGenerator::new(n, d)?),
        })
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R, n: usize, sigma: f64) -> Vec<f64> {
        match self {
            NoiseSource::White => normal_vec(rng, n, sigma),
            NoiseSource::Arfima(g) => g.generate(rng, sigma),
        }
    }
}

fn series_from_noise(config: &SynthConfig, noise: Vec<f64>) -> Result<AnnualSeries<f64>> {
    let values = noise.into_iter().enumerate().map(|(i, e)| config.trend(i + 1) + e).collect();
    AnnualSeries::new(config.start_year, values)
}

/// Trend plus noise, drawn from stream 0 of `config.seed`.
pub fn synth_series(config: &SynthConfig) -> Result<AnnualSeries<f64>> {
    config.validate()?;
    let source = NoiseSource::new(config.noise, config.n_years)?;
    let noise = source.sample(&mut rng::stream(config.seed, Purpose::Synthetic, 0), config.n_years, config.sigma);
    series_from_noise(config, noise)
}

/// Member `index` of an ensemble seeded by `config.seed`.
pub fn synth_member(config: &SynthConfig, index: u64) -> Result<AnnualSeries<f64>> {
    config.validate()?;
    let source = NoiseSource::new(config.noise, config.n_years)?;
    synth_member_with(config, &source, index)
}

pub(crate) fn synth_member_with(config: &SynthConfig, source: &NoiseSource, index: u64) -> Result<AnnualSeries<f64>> {
    let noise = source.sample(&mut rng::stream(config.seed, Purpose::Synthetic, index), config.n_years, config.sigma);
    series_from_noise(config, noise)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub members: usize,
    pub scan: ScanConfig,
    /// Run the Monte Carlo slope-gap test on every member (expensive).
    pub significance: Option<SigConfig>,
    pub workers: Option<usize>,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { members: 1000, scan: ScanConfig::default(), significance: None, workers: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub member: usize,
    pub change_index: usize,
    pub change_year: i32,
    pub a1: f64,
    pub a2: f64,
    pub rmse_dual: f64,
    /// `BIC_single − BIC_dual`; positive favours the dual model.
    pub delta_bic_single_minus_dual: f64,
    pub aic_single_minus_dual: f64,
    pub preferred: Model,
    pub reject_null: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub config: SynthConfig,
    pub members: usize,
    /// Detected change year → member count, over every scanned year.
    pub histogram: BTreeMap<i32, usize>,
    pub within_5: Option<f64>,
    pub within_8: Option<f64>,
    pub dual_fraction: f64,
    /// Fraction of members for which BIC picks the generating model.
    pub selection_accuracy: f64,
    pub aic_dual_fraction: f64,
    pub rejection_fraction: Option<f64>,
    pub outcomes: Vec<MemberOutcome>,
}

pub fn ensemble_experiment(config: &SynthConfig, options: &EnsembleOptions) -> Result<EnsembleSummary> {
    config.validate()?;
    options.scan.validate()?;
    if options.members == 0 {
        return Err(Error::config("ensemble needs at least one member"));
    }
    let range = options.scan.change_range(config.n_years)?;
    let source = NoiseSource::new(config.noise, config.n_years)?;

    let run = |i: usize| -> Result<MemberOutcome> {
        let series = synth_member_with(config, &source, i as u64)?;
        let scan = scan_change_point(&series, &options.scan)?;
        let sel = select_model(&series, &scan)?;
        let reject_null = match &options.significance {
            Some(sig) => {
                let member_sig = SigConfig { seed: sig.seed.wrapping_add(i as u64), ..sig.clone() };
                Some(test_change_point(&series, &member_sig)?.reject)
            }
            None => None,
        };
        Ok(MemberOutcome {
            member: i,
            change_index: scan.best.change_index,
            change_year: scan.best.change_year,
            a1: scan.best.a1,
            a2: scan.best.a2,
            rmse_dual: scan.best.rmse,
            delta_bic_single_minus_dual: sel.delta_bic_single_minus_dual(),
            aic_single_minus_dual: sel.aic_single - sel.aic_dual,
            preferred: sel.preferred,
            reject_null,
        })
    };
    let outcomes = rng::with_workers(options.workers, || {
        (0..options.members).into_par_iter().map(run).collect::<Result<Vec<_>>>()
    })?;

    let m = outcomes.len() as f64;
    let mut histogram: BTreeMap<i32, usize> = range.map(|t| (config.start_year + t as i32 - 1, 0)).collect();
    for o in &outcomes {
        *histogram.entry(o.change_year).or_default() += 1;
    }
    let frac = |pred: &dyn Fn(&MemberOutcome) -> bool| outcomes.iter().filter(|o| pred(o)).count() as f64 / m;
    let (within_5, within_8) = match config.change_index {
        Some(c) => (
            Some(frac(&|o| o.change_index.abs_diff(c) <= 5)),
            Some(frac(&|o| o.change_index.abs_diff(c) <= 8)),
        ),
        None => (None, None),
    };
    let truth = if config.change_index.is_some() { Model::Dual } else { Model::Single };
    let dual_fraction = frac(&|o| o.preferred == Model::Dual);
    let rejection_fraction = options.significance.as_ref().map(|_| frac(&|o| o.reject_null == Some(true)));
    Ok(EnsembleSummary {
        config: *config,
        members: outcomes.len(),
        histogram,
        within_5,
        within_8,
        dual_fraction,
        selection_accuracy: frac(&|o| o.preferred == truth),
        aic_dual_fraction: frac(&|o| o.aic_single_minus_dual > 0.0),
        rejection_fraction,
        outcomes,
    })
}

/// Kolmogorov–Smirnov distance between two histograms on a shared support.
pub fn ks_distance(a: &BTreeMap<i32, usize>, b: &BTreeMap<i32, usize>) -> f64 {
    let total_a: usize = a.values().sum();
    let total_b: usize = b.values().sum();
    if total_a == 0 || total_b == 0 {
        return 1.0;
    }
    let keys: std::collections::BTreeSet<i32> = a.keys().chain(b.keys()).copied().collect();
    let (mut ca, mut cb, mut best) = (0usize, 0usize, 0.0f64);
    for k in keys {
        ca += a.get(&k).copied().unwrap_or(0);
        cb += b.get(&k).copied().unwrap_or(0);
        best = best.max((ca as f64 / total_a as f64 - cb as f64 / total_b as f64).abs());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_reproducible() {
        assert_eq!(gaussian_noise(50, 1.0, 9), gaussian_noise(50, 1.0, 9));
        assert_ne!(gaussian_noise(50, 1.0, 9), gaussian_noise(50, 1.0, 10));
    }

    #[test]
    fn gaussian_moments() {
        let x = gaussian_noise(100_000, 1.0, 42);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((sd - 1.0).abs() < 0.02, "{sd}");
    }

    #[test]
    fn short_sample_std_averages_to_sigma() {
        let mean_sd = (0..100)
            .map(|s| {
                let x = gaussian_noise(70, 0.45, s);
                let m = x.iter().sum::<f64>() / 70.0;
                (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 69.0).sqrt()
            })
            .sum::<f64>()
            / 100.0;
        assert!((mean_sd - 0.45).abs() < 0.02, "{mean_sd}");
    }

    #[test]
    fn arfima_zero_d_is_gaussian() {
        assert_eq!(arfima_noise(80, 0.0, 0.7, 5).unwrap(), gaussian_noise(80, 0.7, 5));
    }

    #[test]
    fn arfima_weight_recursion() {
        let d = 0.23;
        let psi = arfima_weights(d, 3);
        assert_eq!(psi[0], 1.0);
        assert!((psi[1] - d).abs() < 1e-15);
        assert!((psi[2] - d * (1.0 + d) / 2.0).abs() < 1e-15);
        assert!(arfima_weights(0.0, 5)[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn arfima_matches_direct_convolution() {
        let (n, d) = (60, 0.3);
        let g = ArfimaGenerator::new(n, d).unwrap();
        let fast = g.generate(&mut rng::stream(3, Purpose::Synthetic, 0), 1.0);
        let mut r = rng::stream(3, Purpose::Synthetic, 0);
        let current = normal_vec(&mut r, n, 1.0);
        let pre = normal_vec(&mut r, g.lags - 1, 1.0);
        let psi = arfima_weights(d, g.lags);
        let innov = |k: isize| if k >= 0 { current[k as usize] } else { pre[(-k - 1) as usize] };
        for t in 0..n {
            let direct: f64 = (0..g.lags).map(|j| psi[j] * innov(t as isize - j as isize)).sum::<f64>() * g.norm;
            assert!((direct - fast[t]).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn arfima_domain() {
        assert!(arfima_noise(10, 0.5, 1.0, 0).is_err());
        assert!(arfima_noise(10, -0.6, 1.0, 0).is_err());
    }

    #[test]
    fn arfima_positive_lag_one_correlation() {
        let mean_r1 = (0..40)
            .map(|s| {
                let x = arfima_noise(512, 0.3, 1.0, s).unwrap();
                let m = x.iter().sum::<f64>() / x.len() as f64;
                let v: f64 = x.iter().map(|a| (a - m).powi(2)).sum();
                x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / v
            })
            .sum::<f64>()
            / 40.0;
        assert!(mean_r1 > 0.2, "{mean_r1}");
    }

    #[test]
    fn synth_trend_geometry() {
        let cfg = SynthConfig { sigma: 1e-12, ..Default::default() };
        let s = synth_series(&cfg).unwrap();
        assert!((s.values()[69] - s.values()[34] - 1.4).abs() < 1e-9);
        assert!(s.values()[..35].iter().all(|v| v.abs() < 1e-10));
        let scan = scan_change_point(&s, &ScanConfig::default()).unwrap();
        assert_eq!(scan.best.change_index, 35);
    }

    #[test]
    fn synth_no_change_is_pure_noise() {
        let cfg = SynthConfig { seed: 11, ..SynthConfig::no_change() };
        let s = synth_series(&cfg).unwrap();
        assert_eq!(s.values(), gaussian_noise(70, 0.45, 11).as_slice());
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig { sigma: 0.0, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { change_index: Some(70), ..Default::default() }.validate().is_err());
        assert!(SynthConfig { noise: NoiseKind::Arfima { d: 0.5 }, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn tiny_ensemble_runs() {
        let opts = EnsembleOptions { members: 1, ..Default::default() };
        let s = ensemble_experiment(&SynthConfig::default(), &opts).unwrap();
        assert_eq!(s.outcomes.len(), 1);
        assert_eq!(s.histogram.values().sum::<usize>(), 1);
    }

    #[test]
    fn ks_distance_basics() {
        let a: BTreeMap<i32, usize> = [(1, 5), (2, 5)].into_iter().collect();
        let b: BTreeMap<i32, usize> = [(1, 0), (2, 10)].into_iter().collect();
        assert!((ks_distance(&a, &a)).abs() < 1e-15);
        assert!((ks_distance(&a, &b) - 0.5).abs() < 1e-15);
    }
}
