//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix5, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-segment coefficients `(a1, b1, a2, b2)` for a change at `t`.
pub type Coefs = [f64; 4];

/// Least squares on the hinge basis `1, t, max(t − T, 0)`, solved by SVD.
///
/// A different parametrisation of the same model: continuity holds by
/// construction, and the segment coefficients follow from the basis weights.
pub fn hinge_oracle(y: &[f64], change: usize) -> Coefs {
    let n = y.len();
    let tc = change as f64;
    let x = DMatrix::from_fn(n, 3, |i, j| {
        let t = (i + 1) as f64;
        match j {
            0 => 1.0,
            1 => t,
            _ => (t - tc).max(0.0),
        }
    });
    let c = x.svd(true, true).solve(&DVector::from_column_slice(y), 1e-14).expect("svd solve");
    let a1 = c[1];
    let b1 = c[0];
    [a1, b1, a1 + c[2], b1 + a1 * tc]
}

/// Lagrange system of the constrained problem, solved by LU in nalgebra.
///
/// Unknowns `(a1, b1, a2, b2, λ)`; the second segment uses local time
/// `t − T`, so continuity reads `a1·T + b1 − b2 = 0`.
pub fn kkt_oracle(y: &[f64], change: usize) -> Coefs {
    let n = y.len();
    let tc = change as f64;
    let mut m = Matrix5::<f64>::zeros();
    let mut r = Vector5::<f64>::zeros();
    for (i, &v) in y.iter().enumerate() {
        let t = (i + 1) as f64;
        if i < change {
            m[(0, 0)] += t * t;
            m[(0, 1)] += t;
            m[(1, 1)] += 1.0;
            r[0] += t * v;
            r[1] += v;
        } else {
            let u = t - tc;
            m[(2, 2)] += u * u;
            m[(2, 3)] += u;
            m[(3, 3)] += 1.0;
            r[2] += u * v;
            r[3] += v;
        }
    }
    m[(1, 0)] = m[(0, 1)];
    m[(3, 2)] = m[(2, 3)];
    // gradient rows pick up the multiplier, last row is the constraint
    m[(0, 4)] = tc;
    m[(1, 4)] = 1.0;
    m[(3, 4)] = -1.0;
    m[(4, 0)] = tc;
    m[(4, 1)] = 1.0;
    m[(4, 3)] = -1.0;
    assert!(n > change);
    let s = m.lu().solve(&r).expect("kkt solve");
    [s[0], s[1], s[2], s[3]]
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random series of length `n`: trend, break and noise of random size.
pub fn random_series(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let offset: f64 = rng.gen_range(-20.0..20.0);
    let s1: f64 = rng.gen_range(-0.1..0.1);
    let s2: f64 = rng.gen_range(-0.1..0.1);
    let brk = rng.gen_range(2..n - 1);
    let sigma: f64 = 10f64.powf(rng.gen_range(-3.0..0.5));
    (1..=n)
        .map(|t| {
            let tr = if t <= brk { s1 * t as f64 } else { s1 * brk as f64 + s2 * (t - brk) as f64 };
            offset + tr + sigma * (rng.gen::<f64>() - 0.5) * 3.4
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Γ(x) from Stirling's series at `x + k ≥ 25`, brought back by the
/// recurrence `Γ(x) = Γ(x + k) / (x (x + 1) … (x + k − 1))`.
pub fn gamma_oracle(x: f64) -> f64 {
    let mut z = x;
    let mut denom = 1.0;
    while z < 25.0 {
        denom *= z;
        z += 1.0;
    }
    // Bernoulli terms B_2k / (2k (2k − 1) z^(2k − 1))
    const B: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let mut corr = 0.0;
    let mut zp = z;
    for (k, b) in B.iter().enumerate() {
        let m = 2.0 * (k + 1) as f64;
        corr += b / (m * (m - 1.0) * zp);
        zp *= z * z;
    }
    let ln = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + corr;
    ln.exp() / denom
}

/// Double-double number `hi + lo`.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let u = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(u.hi, u.lo + t.lo)
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::from(-q1)));
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::from(-q2)));
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }
}

/// `₂F₁(1, d; 1 − d; φ) = Σ (d)_n / (1 − d)_n φⁿ`, summed for a fixed 50 000
/// terms in double-double arithmetic.
pub fn hyp2f1_oracle(d: f64, phi: f64) -> f64 {
    let (dd, one_minus_d, p) = (Dd::from(d), Dd::from(1.0).add(Dd::from(-d)), Dd::from(phi));
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for n in 0..50_000 {
        let nf = Dd::from(n as f64);
        term = term.mul(dd.add(nf)).div(one_minus_d.add(nf)).mul(p);
        sum = sum.add(term);
    }
    sum.value()
}

pub const D_LATTICE: [f64; 10] = [-0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.45];
pub const PHI_LATTICE: [f64; 11] = [-0.9, -0.7, -0.5, -0.3, -0.1, 0.0, 0.2, 0.5, 0.7, 0.9, 0.95];
