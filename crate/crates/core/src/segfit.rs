//! Exact least-squares fits: a single line, and two lines joined
//! continuously at a fixed change index.
//!
//! Time runs `t = 1..=N`. The first segment owns `t = 1..=T` and is
//! `a1·t + b1`; the second owns `t = T+1..=N` and is `a2·(t − T) + b2`
//! with the continuity constraint `a1·T + b1 = b2`.
//!
//! [`fit_dual_at`] evaluates closed-form coefficient expressions derived from
//! the Lagrangian stationarity system. [`solve_constraint_system`] solves that
//! same 5×5 system with a generic dense solver and exists to cross-check the
//! closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};
use crate::series::AnnualSeries;

/// Ordinary least-squares line over `t = 1..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<S> {
    pub slope: S,
    /// Value of the line at `t = 0`.
    pub intercept: S,
    pub rss: S,
    pub rmse: S,
    pub n: usize,
}

impl<S: Scalar> LinearFit<S> {
    pub fn predict(&self, t: usize) -> S {
        self.slope * S::from_count(t) + self.intercept
    }
}

/// Two continuous line segments meeting at `change_index`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualFit<S> {
    pub change_index: usize,
    pub change_year: i32,
    pub a1: S,
    /// First-segment value at `t = 0`.
    pub b1: S,
    pub a2: S,
    /// Second-segment value at `t = T`.
    pub b2: S,
    pub rss: S,
    pub rmse: S,
    pub n: usize,
}

impl<S: Scalar> DualFit<S> {
    pub fn predict(&self, t: usize) -> S {
        if t <= self.change_index {
            self.a1 * S::from_count(t) + self.b1
        } else {
            self.a2 * S::from_count(t - self.change_index) + self.b2
        }
    }

    /// `a1·T + b1 − b2`; zero up to rounding for every fit.
    pub fn continuity_residual(&self) -> S {
        self.a1 * S::from_count(self.change_index) + self.b1 - self.b2
    }

    /// Absolute slope difference `|a1 − a2|`.
    pub fn slope_gap(&self) -> S {
        (self.a1 - self.a2).abs()
    }
}

/// Result of the direct stationarity-system solve, including the scaled
/// Lagrange multiplier (`−λ/2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSolution<S> {
    pub fit: DualFit<S>,
    pub multiplier: S,
}

pub fn fit_single<S: Scalar>(series: &AnnualSeries<S>) -> Result<LinearFit<S>> {
    fit_line(series.values())
}

/// OLS line through `values[i]` at `t = i + 1`.
pub(crate) fn fit_line<S: Scalar>(values: &[S]) -> Result<LinearFit<S>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Length { required: 2, actual: n });
    }
    let nf = S::from_count(n);
    let mean = values.iter().copied().collect::<CompensatedSum<S>>().value() / nf;
    let t_mean = (nf + S::one()) / S::lit(2.0);
    // Σ (t − t̄)² = N (N² − 1) / 12, exact in integers
    let sxx = S::from_count(n * (n * n - 1)) / S::lit(12.0);
    let sxy = values
        .iter()
        .enumerate()
        .map(|(i, &x)| (S::from_count(i + 1) - t_mean) * (x - mean))
        .collect::<CompensatedSum<S>>()
        .value();
    let slope = sxy / sxx;
    let intercept = mean - slope * t_mean;
    let rss = values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let r = x - (slope * S::from_count(i + 1) + intercept);
            r * r
        })
        .collect::<CompensatedSum<S>>()
        .value();
    Ok(LinearFit { slope, intercept, rss, rmse: (rss / nf).sqrt(), n })
}

pub fn fit_dual_at<S: Scalar>(series: &AnnualSeries<S>, change_index: usize) -> Result<DualFit<S>> {
    DualFitter::new(series).fit_at(change_index)
}

/// Valid change indices for a series of length `n`: each segment needs two
/// points to define its slope.
pub fn valid_change_range(n: usize) -> std::ops::RangeInclusive<usize> {
    2..=n.saturating_sub(2)
}

fn check_change_index(n: usize, change_index: usize) -> Result<()> {
    if n < 4 || !valid_change_range(n).contains(&change_index) {
        return Err(Error::domain(format!(
            "change index {change_index} outside 2..={} for series of length {n}",
            n.saturating_sub(2)
        )));
    }
    Ok(())
}

/// The four data sums of the stationarity system at one change index.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SegmentSums<S> {
    /// Σ_{t=1}^{T} x_t
    pub x1: S,
    /// Σ_{t=1}^{T} t·x_t
    pub xt1: S,
    /// Σ_{t'=1}^{N−T} x_{T+t'}
    pub x2: S,
    /// Σ_{t'=1}^{N−T} t'·x_{T+t'}
    pub xt2: S,
}

/// Compensated prefix sums of `x_t` and `t·x_t` for O(1) segment sums.
#[derive(Clone, Copy, Debug, Default)]
struct Prefix<S> {
    x: CompensatedSum<S>,
    tx: CompensatedSum<S>,
}

/// Prepared dual fitter: centers the series and builds prefix sums once so
/// each change index costs O(1) for the coefficients plus O(N) for the
/// residual sum.
#[derive(Clone, Debug)]
pub struct DualFitter<S> {
    start_year: i32,
    /// Series minus `offset`.
    centered: Vec<S>,
    offset: S,
    prefix: Vec<Prefix<S>>,
}

impl<S: Scalar> DualFitter<S> {
    pub fn new(series: &AnnualSeries<S>) -> Self {
        Self::from_values(series.start_year(), series.values())
    }

    pub(crate) fn from_values(start_year: i32, values: &[S]) -> Self {
        let n = values.len();
        let offset = values.iter().copied().collect::<CompensatedSum<S>>().value()
            / S::from_count(n.max(1));
        let centered: Vec<S> = values.iter().map(|&x| x - offset).collect();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = Prefix::<S>::default();
        prefix.push(acc);
        for (i, &y) in centered.iter().enumerate() {
            acc.x.add(y);
            acc.tx.add(S::from_count(i + 1) * y);
            prefix.push(acc);
        }
        Self { start_year, centered, offset, prefix }
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    fn diff(a: &CompensatedSum<S>, b: &CompensatedSum<S>) -> S {
        let (sa, ca) = a.parts();
        let (sb, cb) = b.parts();
        (sa - sb) + (ca - cb)
    }

    fn sums(&self, change_index: usize) -> SegmentSums<S> {
        let n = self.len();
        let at = &self.prefix[change_index];
        let end = &self.prefix[n];
        let x2 = Self::diff(&end.x, &at.x);
        // Σ_{t=T+1}^{N} (t − T) x_t = Σ t x_t − T Σ x_t over the second segment
        let xt2 = Self::diff(&end.tx, &at.tx) - S::from_count(change_index) * x2;
        SegmentSums { x1: at.x.value(), xt1: at.tx.value(), x2, xt2 }
    }

    pub fn fit_at(&self, change_index: usize) -> Result<DualFit<S>> {
        let n = self.len();
        check_change_index(n, change_index)?;
        let c = closed_form(n, change_index, &self.sums(change_index))?;
        let mut fit = DualFit {
            change_index,
            change_year: self.start_year + change_index as i32 - 1,
            a1: c.a1,
            b1: c.b1,
            a2: c.a2,
            b2: c.b2,
            rss: S::zero(),
            rmse: S::zero(),
            n,
        };
        fit.rss = self.residual_sum(&fit);
        fit.rmse = (fit.rss / S::from_count(n)).sqrt();
        fit.b1 += self.offset;
        fit.b2 += self.offset;
        Ok(fit)
    }

    /// Residual sum of squares of a fit expressed on the centered data.
    fn residual_sum(&self, fit: &DualFit<S>) -> S {
        self.centered
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let r = y - fit.predict(i + 1);
                r * r
            })
            .collect::<CompensatedSum<S>>()
            .value()
    }
}

#[derive(Clone, Copy, Debug)]
struct Coefficients<S> {
    a1: S,
    b1: S,
    a2: S,
    b2: S,
}

/// Integer-coefficient linear form `c_x1·X1 + c_x2·X2 + c_xt1·(XT)1 + c_xt2·(XT)2`.
struct Form {
    x1: i128,
    x2: i128,
    xt1: i128,
    xt2: i128,
}

impl Form {
    fn eval<S: Scalar>(&self, s: &SegmentSums<S>) -> S {
        let c = |v: i128| S::from_i128(v).expect("coefficient representable");
        let mut acc = CompensatedSum::new();
        acc.add(c(self.x1) * s.x1);
        acc.add(c(self.x2) * s.x2);
        acc.add(c(self.xt1) * s.xt1);
        acc.add(c(self.xt2) * s.xt2);
        acc.value()
    }
}

/// Closed-form solution of the constrained normal equations.
///
/// Each coefficient is `form · sums / (N · denominator)`; the polynomial
/// coefficients and denominators are exact integers.
fn closed_form<S: Scalar>(n: usize, change_index: usize, s: &SegmentSums<S>) -> Result<Coefficients<S>> {
    let n = n as i128;
    let t = change_index as i128;
    let (n2, n3) = (n * n, n * n * n);
    let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);

    let a1_num = Form {
        x1: -6 * n2 * t - 6 * n * t + 6 * t3 - 6 * t,
        x2: 12 * n * t2 - 12 * n * t - 12 * t3 + 18 * t2 - 6 * t,
        xt1: 6 * n2 + 12 * n * t - 6 * n - 18 * t2 + 18 * t,
        xt2: -18 * t2 + 18 * t,
    };
    let a1_den = 2 * n * t3 - 3 * n * t2 + n * t - 2 * t4 + 4 * t3 - t2 - t;

    let a2_num = Form {
        x1: 6 * n2 * t + 6 * n2 - 12 * n * t2 - 6 * n * t + 6 * n + 6 * t3 - 6 * t,
        x2: -12 * n2 * t + 6 * n2 + 24 * n * t2 - 24 * n * t + 6 * n - 12 * t3 + 18 * t2 - 6 * t,
        xt1: -18 * n2 + 36 * n * t - 18 * n - 18 * t2 + 18 * t,
        xt2: 24 * n * t - 12 * n - 18 * t2 + 18 * t,
    };
    let a2_den = 2 * n3 * t - n3 - 6 * n2 * t2 + 6 * n2 * t + 6 * n * t3 - 9 * n * t2 + n * t + n
        - 2 * t4
        + 4 * t3
        - t2
        - t;

    let b1_num = Form {
        x1: 6 * n2 * t - 4 * n * t2 + 6 * n * t + 4 * n - 2 * t3 - 2 * t2 + 2 * t + 2,
        x2: -4 * n * t2 + 4 * n + 4 * t3 - 2 * t2 - 4 * t + 2,
        xt1: -6 * n2 - 6 * n + 6 * t2 - 6,
        xt2: 6 * t2 - 6,
    };
    let b1_den = 2 * n * t2 - 3 * n * t + n - 2 * t3 + 4 * t2 - t - 1;

    let b2_num = Form {
        x1: -4 * n * t - 4 * n + 4 * t2 + 2 * t - 2,
        x2: 8 * n * t - 4 * n - 8 * t2 + 8 * t - 2,
        xt1: 12 * n - 12 * t + 6,
        xt2: -12 * t + 6,
    };
    let b2_den = 2 * n * t - n - 2 * t2 + 2 * t + 1;

    let solve = |form: &Form, den: i128| -> Result<S> {
        let den = n * den;
        if den == 0 {
            return Err(Error::Internal(format!(
                "vanishing denominator at N = {n}, T = {t}"
            )));
        }
        Ok(form.eval(s) / S::from_i128(den).expect("denominator representable"))
    };

    Ok(Coefficients {
        a1: solve(&a1_num, a1_den)?,
        b1: solve(&b1_num, b1_den)?,
        a2: solve(&a2_num, a2_den)?,
        b2: solve(&b2_num, b2_den)?,
    })
}

/// Solves the five stationarity equations in `(a1, b1, a2, b2, λ̃)` by
/// Gaussian elimination with partial pivoting.
pub fn solve_constraint_system<S: Scalar>(
    series: &AnnualSeries<S>,
    change_index: usize,
) -> Result<ConstraintSolution<S>> {
    let values = series.values();
    let n = values.len();
    check_change_index(n, change_index)?;
    let t = change_index;
    let m = n - t;

    let mut x1 = CompensatedSum::new();
    let mut xt1 = CompensatedSum::new();
    for (i, &x) in values[..t].iter().enumerate() {
        x1.add(x);
        xt1.add(S::from_count(i + 1) * x);
    }
    let mut x2 = CompensatedSum::new();
    let mut xt2 = CompensatedSum::new();
    for (i, &x) in values[t..].iter().enumerate() {
        x2.add(x);
        xt2.add(S::from_count(i + 1) * x);
    }

    let f = S::from_count;
    let half = S::lit(0.5);
    let three = S::lit(3.0);
    let two = S::lit(2.0);
    let (tf, mf) = (f(t), f(m));
    let s1 = tf * (tf + S::one()) / two;
    let q1 = tf * (tf + S::one()) * (tf + half) / three;
    let s2 = mf * (mf + S::one()) / two;
    let q2 = mf * (mf + S::one()) * (mf + half) / three;
    let (z, o) = (S::zero(), S::one());

    // unknowns: a1, b1, a2, b2, λ̃
    let mut a = [
        [q1, s1, z, z, -tf],
        [s1, tf, z, z, -o],
        [z, z, q2, s2, z],
        [z, z, s2, mf, o],
        [tf, o, z, -o, z],
    ];
    let mut rhs = [xt1.value(), x1.value(), xt2.value(), x2.value(), z];
    let sol = gauss_solve(&mut a, &mut rhs)?;

    let mut fit = DualFit {
        change_index,
        change_year: series.year_of(change_index),
        a1: sol[0],
        b1: sol[1],
        a2: sol[2],
        b2: sol[3],
        rss: z,
        rmse: z,
        n,
    };
    fit.rss = values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let r = x - fit.predict(i + 1);
            r * r
        })
        .collect::<CompensatedSum<S>>()
        .value();
    fit.rmse = (fit.rss / f(n)).sqrt();
    Ok(ConstraintSolution { fit, multiplier: sol[4] })
}

fn gauss_solve<S: Scalar, const K: usize>(a: &mut [[S; K]; K], b: &mut [S; K]) -> Result<[S; K]> {
    // row equilibration keeps the pivot comparison meaningful when rows
    // differ by powers of T
    for i in 0..K {
        let scale = a[i].iter().fold(S::zero(), |m, v| m.max(v.abs()));
        if scale > S::zero() {
            a[i].iter_mut().for_each(|v| *v /= scale);
            b[i] /= scale;
        }
    }
    for col in 0..K {
        let pivot = (col..K)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() <= S::epsilon() * S::lit(16.0) {
            return Err(Error::Internal("singular stationarity system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..K {
            let factor = a[row][col] / a[col][col];
            if factor == S::zero() {
                continue;
            }
            for k in col..K {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = [S::zero(); K];
    for row in (0..K).rev() {
        let mut acc = b[row];
        for k in row + 1..K {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}
