//! Scalar abstraction for the fitting core.
//!
//! The least-squares, scan and information-criterion code is written against
//! [`Scalar`] so it runs in `f32` or `f64`. The stochastic and long-memory
//! machinery is `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by the fitting core: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless for every integer the fits produce (counts, polynomial
    /// denominators below N of about 10^5 in `f64`).
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable as float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Compensated (Neumaier) accumulator.
///
/// Holds a running sum plus a correction term, giving roughly twice the
/// working precision for the data sums fed into the closed-form fit.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<S> {
    sum: S,
    comp: S,
}

impl<S: Scalar> CompensatedSum<S> {
    pub fn new() -> Self {
        Self { sum: S::zero(), comp: S::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> S {
        self.sum + self.comp
    }

    /// Raw `(sum, correction)` pair; differences of two accumulators keep
    /// the extra precision when taken part by part.
    pub fn parts(&self) -> (S, S) {
        (self.sum, self.comp)
    }
}

impl<S: Scalar> FromIterator<S> for CompensatedSum<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn accurate_sum<S: Scalar, I: IntoIterator<Item = S>>(iter: I) -> S {
    iter.into_iter().collect::<CompensatedSum<S>>().value()
}
