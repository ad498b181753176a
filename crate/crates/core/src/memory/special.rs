use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, 9 terms) with the
/// reflection formula below 1/2.
pub fn gamma_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gamma of non-finite {x}")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::domain(format!("gamma pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// A summed power series together with its convergence status.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    /// `false` when the term budget ran out before the tail bound dropped
    /// below tolerance; `value` is then only approximate.
    pub converged: bool,
}

const MAX_TERMS: usize = 2_000_000;
const TERM_TOL: f64 = 1e-15;

/// Gauss hypergeometric series `₂F₁(a, b; c; z)` for `|z| < 1`.
///
/// Plain summation; the caller is responsible for choosing a transformation
/// that keeps `|z|` moderate.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<SeriesValue> {
    if !(z.abs() < 1.0) {
        return Err(Error::domain(format!("hypergeometric series needs |z| < 1, got {z}")));
    }
    if c <= 0.0 && c == c.floor() {
        return Err(Error::domain(format!("hypergeometric lower parameter {c} is a pole")));
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut comp = 0.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let ratio = (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        term *= ratio;
        // Neumaier step
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term == 0.0 {
            return Ok(SeriesValue { value: sum + comp, terms: n + 1, converged: true });
        }
        // once the ratio has settled below 1 the tail is bounded by a
        // geometric series
        let r = ratio.abs().max(z.abs());
        let total = (sum + comp).abs().max(f64::MIN_POSITIVE);
        if r < 1.0 && term.abs() < TERM_TOL * total {
            let tail = term.abs() * r / (1.0 - r);
            if tail < TERM_TOL * total {
                return Ok(SeriesValue { value: sum + comp, terms: n + 1, converged: true });
            }
        }
    }
    Ok(SeriesValue { value: sum + comp, terms: MAX_TERMS, converged: false })
}

/// `₂F₁(1, d; 1 − d; φ)` as it appears in the trend-variance factor.
///
/// Negative arguments below −1/2 go through the Pfaff transformation, which
/// maps them into `(1/3, 1/2)`.
pub fn hyp2f1_1d(d: f64, phi: f64) -> Result<SeriesValue> {
    if !(phi.abs() < 1.0) {
        return Err(Error::domain(format!("phi must satisfy |phi| < 1, got {phi}")));
    }
    if !(d.abs() < 0.5) {
        return Err(Error::domain(format!("d must lie in (-0.5, 0.5), got {d}")));
    }
    if phi < -0.5 {
        let w = phi / (phi - 1.0);
        let inner = hyp2f1(1.0, 1.0 - 2.0 * d, 1.0 - d, w)?;
        return Ok(SeriesValue { value: inner.value / (1.0 - phi), ..inner });
    }
    hyp2f1(1.0, d, 1.0 - d, phi)
}

/// Trend-variance prefactor `f(φ, d)`.
///
/// The `d·Γ(d)` factor of the denominator is evaluated as `Γ(1 + d)` so the
/// white-noise point `d = 0` is regular; `f(0, 0) = 12`.
pub fn f_factor(phi: f64, d: f64) -> Result<f64> {
    let h = hyp2f1_1d(d, phi)?;
    if !h.converged {
        return Err(Error::Estimation(format!(
            "hypergeometric series did not converge at phi = {phi}, d = {d}"
        )));
    }
    let short = (1.0 + phi) / ((1.0 - phi) * (2.0 * h.value - 1.0));
    let long = 36.0 * (1.0 - 2.0 * d) * gamma_function(1.0 - d)?
        / ((1.0 + 2.0 * d) * (3.0 + 2.0 * d) * gamma_function(1.0 + d)?);
    Ok(short * long)
}
