//! Per-cell analysis of a grid and the results CSV.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GridDataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::scan::{scan_change_point, ScanConfig};
use crate::segfit::fit_single;
use crate::selection::{Model, ModelSelection};
use crate::series::AnnualSeries;
use crate::sigtest::{test_change_point, SigConfig, UnitNull};

pub const RESULTS_HEADER: [&str; 14] = [
    "lat",
    "lon",
    "change_year",
    "a1",
    "a2",
    "b1",
    "b2",
    "delta_bic",
    "preferred",
    "significant",
    "s_obs",
    "rmse_single",
    "rmse_dual",
    "candidates",
];

/// How (and whether) each cell's change point is tested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "config", rename_all = "snake_case")]
pub enum Significance {
    Off,
    /// One white-noise null table shared by every cell, rescaled by each
    /// cell's residual spread.
    WhiteShared(SigConfig),
    /// A fresh null ensemble per cell, seeded by `seed + cell index`.
    PerCell(SigConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub scan: ScanConfig,
    pub significance: Significance,
    pub workers: Option<usize>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self { scan: ScanConfig::default(), significance: Significance::Off, workers: None }
    }
}

/// One analysed cell. Slopes are per year; `delta_bic` is
/// `BIC_dual − BIC_single`, negative when the change point is favoured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub lat: f64,
    pub lon: f64,
    pub change_year: i32,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub delta_bic: f64,
    pub preferred: Model,
    /// `None` when significance testing was off.
    pub significant: Option<bool>,
    pub s_obs: f64,
    pub rmse_single: f64,
    pub rmse_dual: f64,
    /// Change years of the near-optimal relative minima, best first.
    pub candidates: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub lat: f64,
    pub lon: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    /// Successful cells in flat grid order.
    pub results: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    /// Valid land cells attempted.
    pub attempted: usize,
}

enum Tester {
    Off,
    Shared(UnitNull),
    PerCell(SigConfig),
}

fn analyze_cell(series: &AnnualSeries<f64>, lat: f64, lon: f64, scan: &ScanConfig, tester: &Tester, cell: usize) -> Result<CellResult> {
    let result = scan_change_point(series, scan)?;
    let single = fit_single(series)?;
    let sel = ModelSelection::from_rss(single.rss, result.best.rss, series.len())?;
    let significant = match tester {
        Tester::Off => None,
        Tester::Shared(null) => Some(null.test(series, &result)?.reject),
        Tester::PerCell(cfg) => {
            let cfg = SigConfig { seed: cfg.seed.wrapping_add(cell as u64), workers: None, ..cfg.clone() };
            Some(test_change_point(series, &cfg)?.reject)
        }
    };
    let best = result.best;
    Ok(CellResult {
        lat,
        lon,
        change_year: best.change_year,
        a1: best.a1,
        a2: best.a2,
        b1: best.b1,
        b2: best.b2,
        delta_bic: sel.delta_bic,
        preferred: sel.preferred,
        significant,
        s_obs: best.slope_gap(),
        rmse_single: single.rmse,
        rmse_dual: best.rmse,
        candidates: result.candidates.iter().map(|p| p.change_year).collect(),
    })
}

/// Scans, selects and optionally tests every valid land cell.
///
/// Configuration problems are returned as errors; a failing cell is recorded
/// in [`BatchOutput::failures`] and the batch continues. The output does not
/// depend on the number of workers.
pub fn batch_analyze(dataset: &GridDataset, config: &BatchConfig) -> Result<BatchOutput> {
    config.scan.validate()?;
    config.scan.change_range(dataset.n_years())?;
    let tester = match &config.significance {
        Significance::Off => Tester::Off,
        Significance::WhiteShared(sig) => {
            let sig = SigConfig { scan: config.scan, workers: config.workers, ..sig.clone() };
            Tester::Shared(UnitNull::new(dataset.n_years(), &sig)?)
        }
        Significance::PerCell(sig) => {
            let sig = SigConfig { scan: config.scan, ..sig.clone() };
            sig.validate()?;
            Tester::PerCell(sig)
        }
    };
    let cells = dataset.analysis_cells();
    let outcomes: Vec<std::result::Result<CellResult, CellFailure>> = rng::with_workers(config.workers, || {
        cells
            .par_iter()
            .map(|&c| {
                let (lat, lon) = dataset.coords(c);
                dataset
                    .cell_series(c)
                    .ok_or_else(|| Error::Internal("valid cell without series".into()))
                    .and_then(|s| analyze_cell(&s, lat, lon, &config.scan, &tester, c))
                    .map_err(|e| CellFailure { lat, lon, message: e.to_string() })
            })
            .collect()
    });
    let mut out = BatchOutput { results: Vec::new(), failures: Vec::new(), attempted: cells.len() };
    for o in outcomes {
        match o {
            Ok(r) => out.results.push(r),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

/// Writes the results CSV; floats use their shortest exact representation so
/// identical results give identical bytes.
pub fn write_results<W: Write>(results: &[CellResult], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in results {
        let significant = r.significant.map(|b| b.to_string()).unwrap_or_default();
        let candidates = r.candidates.iter().map(i32::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            r.lat.to_string(),
            r.lon.to_string(),
            r.change_year.to_string(),
            r.a1.to_string(),
            r.a2.to_string(),
            r.b1.to_string(),
            r.b2.to_string(),
            r.delta_bic.to_string(),
            r.preferred.as_str().to_string(),
            significant,
            r.s_obs.to_string(),
            r.rmse_single.to_string(),
            r.rmse_dual.to_string(),
            candidates,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<CellResult>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Parse { line: 1, message: format!("unexpected results header {header:?}") });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str, f: &str| Error::Parse { line, message: format!("{what} {f:?} unreadable") };
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(RESULTS_HEADER[i], &rec[i]));
        let preferred = match &rec[8] {
            "single" => Model::Single,
            "dual" => Model::Dual,
            f => return Err(bad("preferred", f)),
        };
        let significant = match &rec[9] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            f => return Err(bad("significant", f)),
        };
        let candidates = if rec[13].is_empty() {
            Vec::new()
        } else {
            rec[13].split(';').map(|y| y.parse::<i32>().map_err(|_| bad("candidate", y))).collect::<Result<_>>()?
        };
        out.push(CellResult {
            lat: num(0)?,
            lon: num(1)?,
            change_year: rec[2].parse().map_err(|_| bad("change_year", &rec[2]))?,
            a1: num(3)?,
            a2: num(4)?,
            b1: num(5)?,
            b2: num(6)?,
            delta_bic: num(7)?,
            preferred,
            significant,
            s_obs: num(10)?,
            rmse_single: num(11)?,
            rmse_dual: num(12)?,
            candidates,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent_grid(cells: usize) -> GridDataset {
        let one: Vec<f64> = (1..=72).map(|t| if t <= 30 { 0.01 * t as f64 } else { 0.3 + 0.05 * (t - 30) as f64 }).collect();
        let values = (0..cells).flat_map(|_| one.clone()).collect();
        GridDataset::new(vec![0.0], (0..cells).map(|i| i as f64).collect(), vec![true; cells], 1950, 72, values).unwrap()
    }

    #[test]
    fn identical_cells_identical_results() {
        let g = tent_grid(5);
        let out = batch_analyze(&g, &BatchConfig::default()).unwrap();
        assert_eq!(out.results.len(), 5);
        assert!(out.failures.is_empty());
        for r in &out.results {
            assert_eq!(r.change_year, 1979);
            assert!((r.a1 - 0.01).abs() < 1e-12 && (r.a2 - 0.05).abs() < 1e-12);
            assert_eq!(r.preferred, Model::Dual);
            assert_eq!(r.significant, None);
            let mut a = r.clone();
            a.lon = out.results[0].lon;
            assert_eq!(&a, &out.results[0]);
        }
    }

    #[test]
    fn failures_are_recorded() {
        let mut values = vec![0.0; 2 * 72];
        for (i, v) in values.iter_mut().enumerate().take(72) {
            *v = (i as f64 * 0.7).sin();
        }
        // second cell is constant: every fit is exact, still analysable
        let g = GridDataset::new(vec![0.0], vec![0.0, 1.0], vec![true, true], 1950, 72, values).unwrap();
        let out = batch_analyze(&g, &BatchConfig::default()).unwrap();
        assert_eq!(out.results.len() + out.failures.len(), out.attempted);
        assert!(batch_analyze(&g, &BatchConfig { scan: ScanConfig::with_margin(40), ..Default::default() }).is_err());
    }

    #[test]
    fn results_csv_round_trip() {
        let mut out = batch_analyze(&tent_grid(3), &BatchConfig::default()).unwrap().results;
        out[1].significant = Some(true);
        out[2].candidates.clear();
        out[2].delta_bic = f64::NEG_INFINITY;
        let mut buf = Vec::new();
        write_results(&out, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&RESULTS_HEADER.join(",")));
        assert_eq!(read_results(buf.as_slice()).unwrap(), out);
    }
}
