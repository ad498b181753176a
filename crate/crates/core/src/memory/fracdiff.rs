use crate::error::{Error, Result};

/// Binomial weights of `(1 − B)^d`: `w_0 = 1`, `w_j = w_{j−1}·(j − 1 − d)/j`.
pub fn gl_weights(d: f64, len: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(len);
    if len == 0 {
        return w;
    }
    w.push(1.0);
    for j in 1..len {
        let prev = w[j - 1];
        w.push(prev * (j as f64 - 1.0 - d) / j as f64);
    }
    w
}

/// Grünwald–Letnikov fractional difference of order `d`, truncated at the
/// start of the record: `y_t = Σ_{j=0}^{t−1} w_j x_{t−j}`.
pub fn gl_fractional_diff(values: &[f64], d: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::domain(format!("fractional order must lie in [0, 1], got {d}")));
    }
    let w = gl_weights(d, values.len());
    Ok((0..values.len())
        .map(|t| (0..=t).map(|j| w[j] * values[t - j]).sum())
        .collect())
}

/// Short-range correlation parameter: lag-1 autocorrelation of the
/// demeaned, fractionally differenced series, clamped to ±0.999.
pub fn estimate_phi(values: &[f64], d: f64) -> Result<f64> {
    if values.len() < 30 {
        return Err(Error::Length { required: 30, actual: values.len() });
    }
    let y = gl_fractional_diff(values, d)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let dev: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let var: f64 = dev.iter().map(|v| v * v).sum();
    if !(var > 0.0) || var < 1e-300 {
        return Err(Error::Degenerate("zero variance after fractional differencing".into()));
    }
    let cov: f64 = dev.windows(2).map(|p| p[0] * p[1]).sum();
    Ok((cov / var).clamp(-0.999, 0.999))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_orders() {
        let x = [1.0, 4.0, 9.0, 16.0, 25.0];
        assert_eq!(gl_fractional_diff(&x, 0.0).unwrap(), x.to_vec());
        assert_eq!(gl_fractional_diff(&x, 1.0).unwrap(), vec![1.0, 3.0, 5.0, 7.0, 9.0]);
        assert_eq!(gl_weights(1.0, 4), vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn order_out_of_range() {
        assert!(gl_fractional_diff(&[1.0, 2.0], -0.1).is_err());
        assert!(gl_fractional_diff(&[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn first_weights() {
        let w = gl_weights(0.3, 3);
        assert!((w[1] + 0.3).abs() < 1e-15);
        assert!((w[2] - (-0.3 * 0.7 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn weight_partial_sum_decays() {
        // Σ_{j=0}^{J} w_j = Γ(J + 1 − d) / (Γ(1 − d) Γ(J + 1)) ~ J^(−d) / Γ(1 − d)
        let d = 0.3;
        let g = crate::memory::gamma_function(1.0 - d).unwrap();
        let s1k: f64 = gl_weights(d, 1001).iter().sum();
        assert!((s1k - 1000f64.powf(-d) / g).abs() < 1e-3 * s1k, "{s1k}");
        let s1m: f64 = gl_weights(d, 1_000_001).iter().sum();
        assert!(s1m > 0.0 && s1m < 0.02, "{s1m}");
        assert!(s1m < s1k);
    }

    #[test]
    fn semigroup_on_tail() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) + (i as f64 * 0.1).sin()).collect();
        let twice = gl_fractional_diff(&gl_fractional_diff(&x, 0.3).unwrap(), 0.3).unwrap();
        let once = gl_fractional_diff(&x, 0.6).unwrap();
        for t in 50..200 {
            assert!((twice[t] - once[t]).abs() < 1e-6, "t={t}: {} vs {}", twice[t], once[t]);
        }
    }

    #[test]
    fn phi_errors() {
        assert!(matches!(estimate_phi(&[1.0; 10], 0.0), Err(Error::Length { .. })));
        assert!(matches!(estimate_phi(&[2.5; 40], 0.0), Err(Error::Degenerate(_))));
    }
}
