//! Synthetic grids with known per-cell change points, for tests, benchmarks
//! and stand-in fixtures.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GridDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::stochastic::{synth_member_with, NoiseSource, SynthConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGridConfig {
    pub n_lat: usize,
    pub n_lon: usize,
    /// Expected fraction of land cells.
    pub land_fraction: f64,
    /// Expected fraction of cells that carry a trend change.
    pub break_fraction: f64,
    /// Break cells draw their change index uniformly within this many
    /// years of `series.change_index`.
    pub break_spread: usize,
    /// Per-cell series template: years, slopes, noise. Cells without a
    /// break keep `slope1` throughout.
    pub series: SynthConfig,
    pub seed: u64,
}

impl Default for SyntheticGridConfig {
    fn default() -> Self {
        Self {
            n_lat: 30,
            n_lon: 60,
            land_fraction: 0.3,
            break_fraction: 0.5,
            break_spread: 0,
            series: SynthConfig { start_year: 1950, n_years: 72, ..SynthConfig::default() },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticGrid {
    pub dataset: GridDataset,
    /// Generating change index of each cell, `None` for a single trend.
    pub truth: Vec<Option<usize>>,
}

/// Regular grid of cell centres; every cell, land or not, gets a series.
pub fn synthetic_grid(config: &SyntheticGridConfig) -> Result<SyntheticGrid> {
    if config.n_lat == 0 || config.n_lon == 0 {
        return Err(Error::config("synthetic grid needs at least one row and column"));
    }
    for (name, p) in [("land fraction", config.land_fraction), ("break fraction", config.break_fraction)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!("{name} {p} outside [0, 1]")));
        }
    }
    let template = config.series;
    template.validate()?;
    let centre = template.change_index.unwrap_or(template.n_years / 2);
    if config.break_spread >= centre || centre + config.break_spread >= template.n_years {
        return Err(Error::config(format!(
            "break spread {} leaves the series of {} years",
            config.break_spread, template.n_years
        )));
    }
    let lats = (0..config.n_lat).map(|i| -90.0 + (i as f64 + 0.5) * 180.0 / config.n_lat as f64).collect();
    let lons = (0..config.n_lon).map(|j| -180.0 + (j as f64 + 0.5) * 360.0 / config.n_lon as f64).collect();
    let cells = config.n_lat * config.n_lon;
    let source = NoiseSource::new(template.noise, template.n_years)?;

    let per_cell = (0..cells)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(config.seed, Purpose::GridLayout, c as u64);
            let land = r.gen::<f64>() < config.land_fraction;
            let has_break = r.gen::<f64>() < config.break_fraction;
            let change = has_break.then(|| {
                let s = config.break_spread;
                centre - s + r.gen_range(0..=2 * s)
            });
            let cfg = SynthConfig {
                change_index: change,
                slope2: if change.is_some() { template.slope2 } else { template.slope1 },
                seed: config.seed,
                ..template
            };
            let series = synth_member_with(&cfg, &source, c as u64)?;
            Ok((land, change, series.into_values()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut land = Vec::with_capacity(cells);
    let mut truth = Vec::with_capacity(cells);
    let mut values = Vec::with_capacity(cells * template.n_years);
    for (l, t, v) in per_cell {
        land.push(l);
        truth.push(t);
        values.extend(v);
    }
    let dataset = GridDataset::new(lats, lons, land, template.start_year, template.n_years, values)?;
    Ok(SyntheticGrid { dataset, truth })
}
