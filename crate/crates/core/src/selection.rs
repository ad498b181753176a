//! Information criteria and the single-vs-dual model choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scan::ScanResult;
use crate::segfit::fit_single;
use crate::series::AnnualSeries;

/// Free parameters of the single line (slope, offset).
pub const K_SINGLE: usize = 2;
/// Free parameters of the dual line (two slopes, offset, change time).
pub const K_DUAL: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Single,
    Dual,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Single => "single",
            Model::Dual => "dual",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection<S> {
    pub aic_single: S,
    pub aic_dual: S,
    pub bic_single: S,
    pub bic_dual: S,
    /// `bic_dual − bic_single`; negative favours the dual model.
    pub delta_bic: S,
    pub preferred: Model,
    pub k_single: usize,
    pub k_dual: usize,
}

/// `(AIC, BIC)` with natural logarithms and no constant offset.
///
/// A zero residual sum yields `−∞` for both.
pub fn information_criteria<S: Scalar>(rss: S, n: usize, k: usize) -> Result<(S, S)> {
    if !(rss >= S::zero()) {
        return Err(Error::domain(format!("residual sum of squares {rss} is negative or NaN")));
    }
    if n == 0 || k == 0 {
        return Err(Error::domain(format!("need n >= 1 and k >= 1, got n = {n}, k = {k}")));
    }
    let nf = S::from_count(n);
    let kf = S::from_count(k);
    let fit_term = if rss == S::zero() { S::neg_infinity() } else { nf * (rss / nf).ln() };
    Ok((fit_term + S::lit(2.0) * kf, fit_term + kf * nf.ln()))
}

impl<S: Scalar> ModelSelection<S> {
    pub fn from_rss(rss_single: S, rss_dual: S, n: usize) -> Result<Self> {
        let (aic_single, bic_single) = information_criteria(rss_single, n, K_SINGLE)?;
        let (aic_dual, bic_dual) = information_criteria(rss_dual, n, K_DUAL)?;
        let delta_bic = if bic_dual.is_infinite() && bic_single.is_infinite() {
            // both fits exact: nothing favours the larger model
            S::zero()
        } else {
            bic_dual - bic_single
        };
        let preferred = if delta_bic < S::zero() { Model::Dual } else { Model::Single };
        Ok(Self { aic_single, aic_dual, bic_single, bic_dual, delta_bic, preferred, k_single: K_SINGLE, k_dual: K_DUAL })
    }

    /// `bic_single − bic_dual`: positive favours the dual model.
    pub fn delta_bic_single_minus_dual(&self) -> S {
        -self.delta_bic
    }
}

pub fn select_model<S: Scalar>(series: &AnnualSeries<S>, scan: &ScanResult<S>) -> Result<ModelSelection<S>> {
    if scan.best.n != series.len() {
        return Err(Error::domain(format!(
            "scan covers {} values but series has {}",
            scan.best.n,
            series.len()
        )));
    }
    let single = fit_single(series)?;
    ModelSelection::from_rss(single.rss, scan.best.rss, series.len())
}
