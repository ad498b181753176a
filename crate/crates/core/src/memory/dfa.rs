use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of a detrended fluctuation analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    /// Scaling exponent of `F(s)`; equals the Hurst exponent for
    /// stationary noise.
    pub hurst: f64,
    /// Memory parameter `d = H − 1/2`.
    pub d: f64,
    pub order: usize,
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
    /// Coefficient of determination of the log-log fit.
    pub r_squared: f64,
}

pub const MIN_LEN: usize = 64;
const MIN_SCALES: usize = 4;
const TARGET_SCALES: usize = 10;

/// Log₂-spaced integer scales in `[4, n/4]`, refined until at least ten
/// distinct scales exist (or every integer in range is used).
pub fn default_scales(n: usize) -> Vec<usize> {
    let lo = 4usize;
    let hi = n / 4;
    if hi < lo {
        return Vec::new();
    }
    let mut per_octave = 4usize;
    loop {
        let ratio = 2f64.powf(1.0 / per_octave as f64);
        let mut scales = Vec::new();
        let mut s = lo as f64;
        while s.round() as usize <= hi {
            let v = s.round() as usize;
            if scales.last() != Some(&v) {
                scales.push(v);
            }
            s *= ratio;
        }
        if scales.len() >= TARGET_SCALES || scales.len() == hi - lo + 1 || per_octave >= 256 {
            return scales;
        }
        per_octave *= 2;
    }
}

/// DFA of the given polynomial `order` over `scales` (default:
/// [`default_scales`] without scales shorter than `order + 2`). Segments
/// are taken from both ends of the profile.
pub fn dfa_estimate(values: &[f64], order: usize, scales: Option<&[usize]>) -> Result<DfaResult> {
    let n = values.len();
    if n < MIN_LEN {
        return Err(Error::Length { required: MIN_LEN, actual: n });
    }
    if order == 0 || order > 4 {
        return Err(Error::config(format!("DFA order must be 1..=4, got {order}")));
    }
    let scales: Vec<usize> = match scales {
        Some(s) => s.to_vec(),
        // higher orders need longer segments than the default grid starts with
        None => default_scales(n).into_iter().filter(|&s| s >= order + 2).collect(),
    };
    if let Some(&bad) = scales.iter().find(|&&s| s < order + 2 || s > n / 2) {
        return Err(Error::config(format!("DFA scale {bad} outside [{}, {}]", order + 2, n / 2)));
    }
    if scales.len() < MIN_SCALES {
        return Err(Error::Estimation(format!(
            "only {} scales available, need {MIN_SCALES}",
            scales.len()
        )));
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &x in values {
        acc += x - mean;
        profile.push(acc);
    }

    let mut fluctuations = Vec::with_capacity(scales.len());
    for &s in &scales {
        let segments = n / s;
        let mut total = 0.0;
        for k in 0..segments {
            total += detrended_variance(&profile[k * s..(k + 1) * s], order);
            let end = n - k * s;
            total += detrended_variance(&profile[end - s..end], order);
        }
        fluctuations.push((total / (2 * segments) as f64).sqrt());
    }
    if fluctuations.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Degenerate("vanishing fluctuation function".into()));
    }

    let xs: Vec<f64> = scales.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = fluctuations.iter().map(|f| f.ln()).collect();
    let (slope, r_squared) = loglog_fit(&xs, &ys);
    Ok(DfaResult { hurst: slope, d: slope - 0.5, order, scales, fluctuations, r_squared })
}

fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Mean squared residual of a least-squares polynomial fit to `seg`.
fn detrended_variance(seg: &[f64], order: usize) -> f64 {
    let s = seg.len();
    if order == 1 {
        // closed form on centred abscissa
        let c = (s as f64 - 1.0) / 2.0;
        let my = seg.iter().sum::<f64>() / s as f64;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (i, &y) in seg.iter().enumerate() {
            let x = i as f64 - c;
            sxx += x * x;
            sxy += x * (y - my);
        }
        let b = sxy / sxx;
        return seg
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let r = y - my - b * (i as f64 - c);
                r * r
            })
            .sum::<f64>()
            / s as f64;
    }
    // normal equations on abscissa scaled to [-1, 1]
    let k = order + 1;
    let scale = if s > 1 { (s - 1) as f64 / 2.0 } else { 1.0 };
    let xs: Vec<f64> = (0..s).map(|i| i as f64 / scale - 1.0).collect();
    let mut a = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (&x, &y) in xs.iter().zip(seg) {
        let mut pw = vec![1.0; k];
        for p in 1..k {
            pw[p] = pw[p - 1] * x;
        }
        for r in 0..k {
            rhs[r] += pw[r] * y;
            for c in 0..k {
                a[r][c] += pw[r] * pw[c];
            }
        }
    }
    let coef = solve_dense(a, rhs);
    xs.iter()
        .zip(seg)
        .map(|(&x, &y)| {
            let fit = coef.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            (y - fit).powi(2)
        })
        .sum::<f64>()
        / s as f64
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let p = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let mut acc = b[r];
        for c in r + 1..k {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x
}
