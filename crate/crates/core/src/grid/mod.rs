//! Gridded annual temperatures: ingestion, land masking, area weighting and
//! per-cell batch analysis.
//!
//! Values are stored lat-major, then lon, then year, with `NaN` marking a
//! missing year. A cell is valid only when every year is present; the fit
//! formulas assume contiguous `t = 1..N`, so gaps are never interpolated.

mod batch;
mod binary;
mod csv_io;
mod summary;
mod synthetic;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::accurate_sum;
use crate::series::AnnualSeries;

pub use batch::{batch_analyze, read_results, write_results, BatchConfig, BatchOutput, CellFailure, CellResult, Significance, RESULTS_HEADER};
pub use binary::{read_binary, write_binary, MAGIC};
pub use csv_io::{daily_to_annual, read_csv, read_daily_csv, write_csv, DAILY_HEADER, DEFAULT_MIN_DAYS, GRID_HEADER};
pub use summary::{summarize_area, AreaSummary};
pub use synthetic::{synthetic_grid, SyntheticGrid, SyntheticGridConfig};

/// Why a cell is excluded from analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum InvalidReason {
    /// The input holds no row for this cell.
    NoData,
    /// Some years are missing; `first` is the earliest missing year.
    MissingYears { count: usize, first: i32 },
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::NoData => write!(f, "no_data"),
            InvalidReason::MissingYears { count, first } => write!(f, "missing_years:{count}:{first}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Valid,
    Invalid(InvalidReason),
}

impl CellStatus {
    pub fn is_valid(self) -> bool {
        self == CellStatus::Valid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    /// Annual CSV, `lat,lon,land,year,value`.
    Csv,
    /// Daily CSV, `lat,lon,land,date,value`, aggregated on load.
    DailyCsv,
    Binary,
    /// Binary when the file starts with the magic, else CSV by header.
    Auto,
}

/// Summary of one ingestion.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub cells: usize,
    pub valid: usize,
    pub invalid: usize,
    pub land: usize,
    pub land_valid: usize,
    pub rows: usize,
    /// Cell-years with no value (absent row, empty field or incomplete year).
    pub missing_values: usize,
    /// Invalid reasons with their cell counts, keyed by the reason's kind.
    pub invalid_reasons: std::collections::BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridDataset {
    lats: Vec<f64>,
    lons: Vec<f64>,
    land: Vec<bool>,
    start_year: i32,
    n_years: usize,
    values: Vec<f64>,
    status: Vec<CellStatus>,
}

impl GridDataset {
    /// Builds a grid and derives every cell's validity from its values.
    ///
    /// `land` has one flag per cell and `values` `n_years` entries per cell,
    /// both lat-major. Non-finite values count as missing.
    pub fn new(
        lats: Vec<f64>,
        lons: Vec<f64>,
        land: Vec<bool>,
        start_year: i32,
        n_years: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let has_row = vec![true; lats.len() * lons.len()];
        Self::with_presence(lats, lons, land, start_year, n_years, values, &has_row)
    }

    pub(crate) fn with_presence(
        lats: Vec<f64>,
        lons: Vec<f64>,
        land: Vec<bool>,
        start_year: i32,
        n_years: usize,
        mut values: Vec<f64>,
        has_row: &[bool],
    ) -> Result<Self> {
        if lats.is_empty() || lons.is_empty() {
            return Err(Error::Structure("grid needs at least one latitude and longitude".into()));
        }
        if let Some(l) = lats.iter().find(|l| !(l.abs() <= 90.0)) {
            return Err(Error::domain(format!("latitude {l} outside [-90, 90]")));
        }
        if lats.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Structure("latitudes must be strictly ascending".into()));
        }
        if let Some(l) = lons.iter().find(|l| !l.is_finite()) {
            return Err(Error::domain(format!("longitude {l} not finite")));
        }
        if lons.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Structure("longitudes must be strictly ascending".into()));
        }
        let cells = lats.len() * lons.len();
        if land.len() != cells {
            return Err(Error::Structure(format!("land mask has {} entries for {cells} cells", land.len())));
        }
        if n_years == 0 {
            return Err(Error::Structure("grid covers no years".into()));
        }
        if values.len() != cells * n_years {
            return Err(Error::Structure(format!(
                "{} values for {cells} cells × {n_years} years",
                values.len()
            )));
        }
        for v in values.iter_mut() {
            if !v.is_finite() {
                *v = f64::NAN;
            }
        }
        let status = (0..cells)
            .map(|c| {
                if !has_row[c] {
                    return CellStatus::Invalid(InvalidReason::NoData);
                }
                let cell = &values[c * n_years..(c + 1) * n_years];
                let missing = cell.iter().filter(|v| v.is_nan()).count();
                if missing == 0 {
                    CellStatus::Valid
                } else {
                    let first = cell.iter().position(|v| v.is_nan()).unwrap_or(0);
                    CellStatus::Invalid(InvalidReason::MissingYears { count: missing, first: start_year + first as i32 })
                }
            })
            .collect();
        Ok(Self { lats, lons, land, start_year, n_years, values, status })
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    pub fn n_cells(&self) -> usize {
        self.land.len()
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.n_years as i32 - 1
    }

    /// Flat cell index of `(lat index, lon index)`.
    pub fn cell_index(&self, i_lat: usize, i_lon: usize) -> usize {
        i_lat * self.lons.len() + i_lon
    }

    /// `(lat, lon)` of a flat cell index.
    pub fn coords(&self, cell: usize) -> (f64, f64) {
        (self.lats[cell / self.lons.len()], self.lons[cell % self.lons.len()])
    }

    pub fn is_land(&self, cell: usize) -> bool {
        self.land[cell]
    }

    pub fn land_mask(&self) -> &[bool] {
        &self.land
    }

    pub fn status(&self, cell: usize) -> CellStatus {
        self.status[cell]
    }

    /// Raw values of a cell, `NaN` where missing.
    pub fn cell_values(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.n_years..(cell + 1) * self.n_years]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Series of a valid cell.
    pub fn cell_series(&self, cell: usize) -> Option<AnnualSeries<f64>> {
        if !self.status[cell].is_valid() {
            return None;
        }
        AnnualSeries::new(self.start_year, self.cell_values(cell).to_vec()).ok()
    }

    /// Valid land cells in flat-index order.
    pub fn analysis_cells(&self) -> Vec<usize> {
        (0..self.n_cells()).filter(|&c| self.land[c] && self.status[c].is_valid()).collect()
    }

    pub fn report(&self, rows: usize) -> IngestReport {
        let mut r = IngestReport { cells: self.n_cells(), rows, ..Default::default() };
        for c in 0..self.n_cells() {
            let valid = self.status[c].is_valid();
            r.valid += valid as usize;
            r.land += self.land[c] as usize;
            r.land_valid += (valid && self.land[c]) as usize;
            if let CellStatus::Invalid(reason) = self.status[c] {
                r.invalid += 1;
                let key = match reason {
                    InvalidReason::NoData => "no_data",
                    InvalidReason::MissingYears { .. } => "missing_years",
                };
                *r.invalid_reasons.entry(key.to_string()).or_default() += 1;
            }
        }
        r.missing_values = self.values.iter().filter(|v| v.is_nan()).count();
        r
    }
}

/// Grid plus the report of how it was read.
#[derive(Clone, Debug)]
pub struct LoadedGrid {
    pub dataset: GridDataset,
    pub report: IngestReport,
}

pub fn load_grid(path: impl AsRef<Path>, format: GridFormat) -> Result<LoadedGrid> {
    let path = path.as_ref();
    let format = match format {
        GridFormat::Auto => detect_format(path)?,
        f => f,
    };
    match format {
        GridFormat::Binary => {
            let dataset = read_binary(std::io::BufReader::new(std::fs::File::open(path)?))?;
            let rows = dataset.n_cells() * dataset.n_years();
            let report = dataset.report(rows);
            Ok(LoadedGrid { dataset, report })
        }
        GridFormat::Csv => read_csv(std::fs::File::open(path)?),
        GridFormat::DailyCsv => read_daily_csv(std::fs::File::open(path)?, DEFAULT_MIN_DAYS),
        GridFormat::Auto => unreachable!(),
    }
}

fn detect_format(path: &Path) -> Result<GridFormat> {
    use std::io::{BufRead, Read};
    let mut reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut head = [0u8; 8];
    let got = reader.read(&mut head)?;
    if got == MAGIC.len() && head == *MAGIC {
        return Ok(GridFormat::Binary);
    }
    let mut first = String::from_utf8_lossy(&head[..got]).into_owned();
    reader.read_line(&mut first)?;
    let line = first.lines().next().unwrap_or("").trim_start_matches('\u{feff}').trim();
    Ok(if line.split(',').any(|f| f.trim() == "date") { GridFormat::DailyCsv } else { GridFormat::Csv })
}

/// `cos(lat)`, the relative area of a regular lat-lon cell.
pub fn area_weights(lats: &[f64]) -> Vec<f64> {
    lats.iter().map(|l| l.to_radians().cos().max(0.0)).collect()
}

pub fn area_weight(lat: f64) -> f64 {
    lat.to_radians().cos().max(0.0)
}

/// Area-weighted mean over valid land cells, weights renormalized per year.
pub fn global_mean_series(dataset: &GridDataset) -> Result<AnnualSeries<f64>> {
    let cells = dataset.analysis_cells();
    if cells.is_empty() {
        return Err(Error::EmptyDomain("no valid land cells".into()));
    }
    let weights: Vec<f64> = cells.iter().map(|&c| area_weight(dataset.coords(c).0)).collect();
    let mut out = Vec::with_capacity(dataset.n_years());
    for y in 0..dataset.n_years() {
        let present = || cells.iter().zip(&weights).filter(|(&c, _)| !dataset.cell_values(c)[y].is_nan());
        let total = accurate_sum(present().map(|(_, &w)| w));
        if !(total > 0.0) {
            return Err(Error::EmptyDomain(format!(
                "year {}: valid land cells carry zero area",
                dataset.start_year() + y as i32
            )));
        }
        out.push(accurate_sum(present().map(|(&c, &w)| w * dataset.cell_values(c)[y])) / total);
    }
    AnnualSeries::new(dataset.start_year(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lats: Vec<f64>, lons: Vec<f64>, land: Vec<bool>, values: Vec<f64>, n_years: usize) -> GridDataset {
        GridDataset::new(lats, lons, land, 2000, n_years, values).unwrap()
    }

    #[test]
    fn weights() {
        let w = area_weights(&[0.0, 60.0, 90.0, -90.0]);
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert!(w[2].abs() < 1e-15 && w[2] >= 0.0);
        assert!(w[3].abs() < 1e-15 && w[3] >= 0.0);
    }

    #[test]
    fn weighted_two_cell_mean() {
        let g = grid(vec![0.0, 60.0], vec![10.0], vec![true, true], vec![0.0, 0.0, 0.0, 3.0, 3.0, 3.0], 3);
        let m = global_mean_series(&g).unwrap();
        for v in m.values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_cell_and_uniform_field() {
        let g = grid(vec![45.0], vec![0.0], vec![true], vec![1.0, 2.5, -3.0], 3);
        assert_eq!(global_mean_series(&g).unwrap().values(), &[1.0, 2.5, -3.0]);

        let lats = vec![-60.0, -10.0, 30.0, 80.0];
        let values: Vec<f64> = std::iter::repeat(4.25).take(4 * 2 * 3).collect();
        for mask in [vec![true; 8], vec![true, false, false, true, true, false, false, false]] {
            let g = grid(lats.clone(), vec![0.0, 1.0], mask, values.clone(), 3);
            for v in global_mean_series(&g).unwrap().values() {
                assert!((v - 4.25).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn empty_domain() {
        let g = grid(vec![0.0], vec![0.0], vec![false], vec![1.0; 3], 3);
        assert!(matches!(global_mean_series(&g), Err(Error::EmptyDomain(_))));
        let g = grid(vec![0.0], vec![0.0], vec![true], vec![1.0, f64::NAN, 2.0], 3);
        assert!(matches!(global_mean_series(&g), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn validity_and_report() {
        let mut v = vec![1.0; 4 * 5];
        v[2 * 5 + 3] = f64::NAN;
        let g = grid(vec![0.0, 1.0], vec![0.0, 1.0], vec![true, true, true, false], v, 5);
        assert_eq!(g.status(2), CellStatus::Invalid(InvalidReason::MissingYears { count: 1, first: 2003 }));
        let r = g.report(19);
        assert_eq!((r.valid, r.invalid, r.land, r.land_valid), (3, 1, 3, 2));
        assert_eq!(r.valid + r.invalid, r.cells);
        assert_eq!(r.invalid_reasons["missing_years"], 1);
        assert_eq!(g.analysis_cells(), vec![0, 1]);
        assert_eq!(g.coords(3), (1.0, 1.0));
    }

    #[test]
    fn structural_checks() {
        assert!(GridDataset::new(vec![1.0, 0.0], vec![0.0], vec![true; 2], 0, 1, vec![0.0; 2]).is_err());
        assert!(GridDataset::new(vec![91.0], vec![0.0], vec![true], 0, 1, vec![0.0]).is_err());
        assert!(GridDataset::new(vec![0.0], vec![0.0], vec![true, false], 0, 1, vec![0.0]).is_err());
        assert!(GridDataset::new(vec![0.0], vec![0.0], vec![true], 0, 2, vec![0.0]).is_err());
    }
}
