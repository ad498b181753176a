use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A complete, contiguous run of annual values.
///
/// Time index `t` runs `1..=N` with `t = 1` at `start_year`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries<S> {
    start_year: i32,
    values: Vec<S>,
}

impl<S: Scalar> AnnualSeries<S> {
    pub const MIN_LEN: usize = 3;

    pub fn new(start_year: i32, values: Vec<S>) -> Result<Self> {
        if values.len() < Self::MIN_LEN {
            return Err(Error::Length { required: Self::MIN_LEN, actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value in year {}",
                start_year + i as i32
            )));
        }
        Ok(Self { start_year, values })
    }

    /// Builds a series from `(year, value)` pairs which must be strictly
    /// consecutive.
    pub fn from_pairs(pairs: &[(i32, S)]) -> Result<Self> {
        let Some(&(first, _)) = pairs.first() else {
            return Err(Error::Length { required: Self::MIN_LEN, actual: 0 });
        };
        for (i, w) in pairs.windows(2).enumerate() {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::Structure(format!(
                    "years not contiguous: {} follows {} (entry {})",
                    w[1].0,
                    w[0].0,
                    i + 2
                )));
            }
        }
        Self::new(first, pairs.iter().map(|p| p.1).collect())
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// Calendar year of time index `t` (1-based).
    pub fn year_of(&self, t: usize) -> i32 {
        self.start_year + t as i32 - 1
    }

    /// Time index (1-based) of a calendar year, if inside the series.
    pub fn index_of(&self, year: i32) -> Option<usize> {
        let t = year - self.start_year + 1;
        (t >= 1 && t as usize <= self.values.len()).then_some(t as usize)
    }

    /// Sub-series covering `first..=last` years.
    pub fn window(&self, first: i32, last: i32) -> Result<Self> {
        let (Some(a), Some(b)) = (self.index_of(first), self.index_of(last)) else {
            return Err(Error::domain(format!(
                "window {first}-{last} outside {}-{}",
                self.start_year,
                self.end_year()
            )));
        };
        Self::new(first, self.values[a - 1..b].to_vec())
    }

    pub fn map<F: FnMut(S) -> S>(&self, f: F) -> Result<Self> {
        Self::new(self.start_year, self.values.iter().copied().map(f).collect())
    }
}
