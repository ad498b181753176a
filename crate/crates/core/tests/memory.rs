use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trendbreak::memory::{dfa_estimate, estimate_memory, estimate_phi, moving_window_trends, trend_variance, MemoryParams};
use trendbreak::stochastic::{arfima_noise, gaussian_noise};
use trendbreak::AnnualSeries;

fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    // burn in so the start is stationary
    (0..n + 500)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut r);
            x = phi * x + e;
            x
        })
        .skip(500)
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn dfa_recovers_memory_of_generated_noise() {
    for d in [0.0, 0.2, 0.35] {
        let hs: Vec<f64> = (0..12)
            .map(|k| dfa_estimate(&arfima_noise(2048, d, 1.0, 100 + k).unwrap(), 1, None).unwrap().hurst)
            .collect();
        let h = mean(&hs);
        assert!((h - (d + 0.5)).abs() < 0.06, "d={d}: mean H {h}");
    }
}

#[test]
fn dfa_higher_orders_agree_on_white_noise() {
    let x = gaussian_noise(4096, 1.0, 9);
    for order in 1..=3 {
        let r = dfa_estimate(&x, order, None).unwrap();
        assert!((r.hurst - 0.5).abs() < 0.07, "order {order}: {}", r.hurst);
        assert!(r.r_squared > 0.95);
    }
}

#[test]
fn phi_of_ar1() {
    for phi in [-0.4, 0.0, 0.5, 0.8] {
        let est = estimate_phi(&ar1(8000, phi, 3), 0.0).unwrap();
        assert!((est - phi).abs() < 0.04, "φ={phi}: {est}");
    }
}

#[test]
fn white_noise_slope_variance() {
    let n = 50;
    let slopes: Vec<f64> = (0..4000)
        .map(|k| {
            let y = gaussian_noise(n, 1.3, 1_000 + k);
            trendbreak::fit_single(&AnnualSeries::new(0, y).unwrap()).unwrap().slope
        })
        .collect();
    let m = mean(&slopes);
    let var = slopes.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (slopes.len() - 1) as f64;
    let exact = 12.0 * 1.3 * 1.3 / (n as f64 * ((n * n) as f64 - 1.0));
    let asymptotic = trend_variance(1.3 * 1.3, 0.0, 0.0, n).unwrap();
    assert!((var / exact - 1.0).abs() < 0.08, "{var} vs {exact}");
    assert!((asymptotic / exact - 1.0).abs() < 1e-3);
}

#[test]
fn moving_window_error_bars_scale_with_length() {
    let y = gaussian_noise(2000, 1.0, 21);
    let s = AnnualSeries::new(1, y).unwrap();
    let var = |l: usize| {
        let a = moving_window_trends(&s, l, Some(MemoryParams::white(1.0))).unwrap();
        mean(&a.windows.iter().map(|w| w.sigma_slope * w.sigma_slope).collect::<Vec<_>>())
    };
    let ratio = var(20) / var(40);
    assert!((ratio - 8.0).abs() < 0.8, "ratio {ratio}");
}

#[test]
fn estimated_memory_of_long_memory_series() {
    let y = arfima_noise(4096, 0.3, 0.5, 77).unwrap();
    let p = estimate_memory(&AnnualSeries::new(1, y).unwrap()).unwrap();
    assert!((p.d - 0.3).abs() < 0.1, "{p:?}");
    assert!((p.sigma2.sqrt() - 0.5).abs() < 0.2);
    assert!(!p.notes.is_empty());

    // too short for DFA: d falls back to zero
    let short = AnnualSeries::new(1, gaussian_noise(40, 1.0, 1)).unwrap();
    assert_eq!(estimate_memory(&short).unwrap().d, 0.0);
}
