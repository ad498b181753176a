//! Area-weighted statistics of batch results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{area_weight, CellResult, GridDataset};
use crate::selection::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaSummary {
    pub cells: usize,
    /// Σ cos(lat) over the analysed cells.
    pub analysed_weight: f64,
    /// Analysed area as a fraction of all land area in the dataset.
    pub land_coverage: f64,
    /// Area fractions below are relative to the analysed area.
    pub dual_fraction: f64,
    pub significant_fraction: Option<f64>,
    pub significant_and_dual_fraction: Option<f64>,
    /// Area where the slope-gap test and BIC agree (reject ⇔ dual).
    pub test_bic_agreement: Option<f64>,
    /// Change year → area fraction among dual-preferred cells.
    pub change_year_histogram: BTreeMap<i32, f64>,
    /// Running sum of the histogram, in year order.
    pub change_year_cumulative: Vec<(i32, f64)>,
}

pub fn summarize_area(results: &[CellResult], dataset: &GridDataset) -> AreaSummary {
    let weights: Vec<f64> = results.iter().map(|r| area_weight(r.lat)).collect();
    let total: f64 = weights.iter().sum();
    let land_total: f64 = (0..dataset.n_cells())
        .filter(|&c| dataset.is_land(c))
        .map(|c| area_weight(dataset.coords(c).0))
        .sum();
    let frac = |pred: &dyn Fn(&CellResult) -> bool| {
        let w: f64 = results.iter().zip(&weights).filter(|(r, _)| pred(r)).map(|(_, w)| w).sum();
        if total > 0.0 {
            w / total
        } else {
            0.0
        }
    };
    let tested = !results.is_empty() && results.iter().all(|r| r.significant.is_some());
    let dual = |r: &CellResult| r.preferred == Model::Dual;

    let mut histogram = BTreeMap::new();
    let dual_weight: f64 = results.iter().zip(&weights).filter(|(r, _)| dual(r)).map(|(_, w)| w).sum();
    if dual_weight > 0.0 {
        for (r, w) in results.iter().zip(&weights).filter(|(r, _)| dual(r)) {
            *histogram.entry(r.change_year).or_insert(0.0) += w / dual_weight;
        }
    }
    let mut running = 0.0;
    let cumulative = histogram
        .iter()
        .map(|(&y, &p)| {
            running += p;
            (y, running)
        })
        .collect();

    AreaSummary {
        cells: results.len(),
        analysed_weight: total,
        land_coverage: if land_total > 0.0 { total / land_total } else { 0.0 },
        dual_fraction: frac(&dual),
        significant_fraction: tested.then(|| frac(&|r| r.significant == Some(true))),
        significant_and_dual_fraction: tested.then(|| frac(&|r| r.significant == Some(true) && dual(r))),
        test_bic_agreement: tested.then(|| frac(&|r| r.significant == Some(dual(r)))),
        change_year_histogram: histogram,
        change_year_cumulative: cumulative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(lat: f64, preferred: Model, significant: Option<bool>, year: i32) -> CellResult {
        CellResult {
            lat,
            lon: 0.0,
            change_year: year,
            a1: 0.0,
            a2: 0.0,
            b1: 0.0,
            b2: 0.0,
            delta_bic: 0.0,
            preferred,
            significant,
            s_obs: 0.0,
            rmse_single: 0.0,
            rmse_dual: 0.0,
            candidates: vec![year],
        }
    }

    fn dataset(lats: Vec<f64>) -> GridDataset {
        let n = lats.len();
        GridDataset::new(lats, vec![0.0], vec![true; n], 0, 1, vec![0.0; n]).unwrap()
    }

    #[test]
    fn all_dual() {
        let r = vec![cell(0.0, Model::Dual, None, 1980), cell(30.0, Model::Dual, None, 1990)];
        let s = summarize_area(&r, &dataset(vec![0.0, 30.0]));
        assert_eq!(s.dual_fraction, 1.0);
        assert_eq!(s.significant_fraction, None);
        assert!((s.land_coverage - 1.0).abs() < 1e-15);
        assert!((s.change_year_cumulative.last().unwrap().1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_latitudes_split() {
        let r = vec![cell(10.0, Model::Dual, Some(true), 1980), cell(10.0, Model::Single, Some(true), 1980)];
        let s = summarize_area(&r, &dataset(vec![10.0]));
        assert!((s.dual_fraction - 0.5).abs() < 1e-15);
        assert_eq!(s.significant_fraction, Some(1.0));
        assert!((s.test_bic_agreement.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn latitude_weighting() {
        let r = vec![cell(0.0, Model::Dual, Some(true), 1975), cell(60.0, Model::Single, Some(false), 1990)];
        let s = summarize_area(&r, &dataset(vec![0.0, 60.0]));
        assert!((s.dual_fraction - 1.0 / 1.5).abs() < 1e-12);
        assert_eq!(s.test_bic_agreement, Some(1.0));
        assert_eq!(s.change_year_histogram.len(), 1);
        assert!((s.change_year_histogram[&1975] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_results() {
        let s = summarize_area(&[], &dataset(vec![0.0]));
        assert_eq!(s.dual_fraction, 0.0);
        assert_eq!(s.land_coverage, 0.0);
        assert!(s.change_year_cumulative.is_empty());
    }
}
