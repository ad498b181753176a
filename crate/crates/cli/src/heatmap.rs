//! Plain raster heatmaps (binary PPM) of batch results.
//!
//! One pixel per grid cell, north up, west left. Colour ramps and value
//! ranges are fixed so maps from different runs compare directly; values
//! outside the range are clamped. Cells without a result are white, and in
//! the change-year and slope maps cells preferring the single line are gray.

use serde::Serialize;
use serde_json::{json, Value};
use trendbreak::grid::CellResult;
use trendbreak::Model;

pub const NODATA: [u8; 3] = [255, 255, 255];
pub const MASKED: [u8; 3] = [128, 128, 128];

/// Red-blue diverging ramp, negative blue.
const DIVERGING: [[u8; 3]; 5] = [[33, 102, 172], [103, 169, 207], [247, 247, 247], [239, 138, 98], [178, 24, 43]];
/// Perceptually ordered purple → yellow ramp.
const SEQUENTIAL: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    ChangeYear,
    A1,
    A2,
    SlopeDiff,
    DeltaBic,
}

impl Field {
    pub const ALL: [Field; 5] = [Field::ChangeYear, Field::A1, Field::A2, Field::SlopeDiff, Field::DeltaBic];

    pub fn name(self) -> &'static str {
        match self {
            Field::ChangeYear => "change_year",
            Field::A1 => "a1",
            Field::A2 => "a2",
            Field::SlopeDiff => "a2_minus_a1",
            Field::DeltaBic => "delta_bic",
        }
    }

    pub fn value(self, r: &CellResult) -> f64 {
        match self {
            Field::ChangeYear => r.change_year as f64,
            Field::A1 => r.a1,
            Field::A2 => r.a2,
            Field::SlopeDiff => r.a2 - r.a1,
            Field::DeltaBic => r.delta_bic,
        }
    }

    /// Whether single-preferred cells are grayed out.
    pub fn masks_single(self) -> bool {
        self != Field::DeltaBic
    }

    fn unit(self) -> &'static str {
        match self {
            Field::ChangeYear => "year",
            Field::A1 | Field::A2 | Field::SlopeDiff => "unit/year",
            Field::DeltaBic => "BIC_dual - BIC_single (negative favours a change point)",
        }
    }

    fn ramp(self) -> (&'static str, &'static [[u8; 3]; 5]) {
        match self {
            Field::ChangeYear => ("sequential", &SEQUENTIAL),
            _ => ("diverging", &DIVERGING),
        }
    }

    /// Fixed colour range; the change-year range spans the scanned years.
    pub fn range(self, years: (i32, i32)) -> (f64, f64) {
        match self {
            Field::ChangeYear => (years.0 as f64, years.1 as f64),
            Field::A1 | Field::A2 => (-0.06, 0.06),
            Field::SlopeDiff => (-0.08, 0.08),
            // a flat-to-rising change in 70 noisy years sits near -20
            Field::DeltaBic => (-40.0, 40.0),
        }
    }
}

/// Cell axes of the raster, both ascending.
#[derive(Clone, Debug, Serialize)]
pub struct Axes {
    pub lats: Vec<f64>,
    pub lons: Vec<f64>,
}

impl Axes {
    pub fn from_results(results: &[CellResult]) -> Self {
        let axis = |f: &dyn Fn(&CellResult) -> f64| {
            let mut v: Vec<f64> = results.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        Self { lats: axis(&|r| r.lat), lons: axis(&|r| r.lon) }
    }

    fn position(axis: &[f64], x: f64) -> Option<usize> {
        axis.binary_search_by(|a| a.total_cmp(&x)).ok()
    }
}

/// Field values in raster order: row 0 is the northernmost latitude.
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Option<(f64, bool)>>,
}

impl Raster {
    /// Results outside the axes are ignored.
    pub fn build(field: Field, axes: &Axes, results: &[CellResult]) -> Self {
        let (width, height) = (axes.lons.len(), axes.lats.len());
        let mut cells = vec![None; width * height];
        for r in results {
            if let (Some(i), Some(j)) = (Axes::position(&axes.lats, r.lat), Axes::position(&axes.lons, r.lon)) {
                let masked = field.masks_single() && r.preferred == Model::Single;
                cells[(height - 1 - i) * width + j] = Some((field.value(r), masked));
            }
        }
        Self { width, height, cells }
    }
}

fn colour(ramp: &[[u8; 3]; 5], range: (f64, f64), v: f64) -> [u8; 3] {
    let span = range.1 - range.0;
    let x = if span > 0.0 { ((v - range.0) / span).clamp(0.0, 1.0) } else { 0.5 };
    let x = if x.is_nan() { 0.5 } else { x };
    let pos = x * (ramp.len() - 1) as f64;
    let k = (pos.floor() as usize).min(ramp.len() - 2);
    let f = pos - k as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (ramp[k][c] as f64 + f * (ramp[k + 1][c] as f64 - ramp[k][c] as f64)).round() as u8;
    }
    out
}

pub fn render_ppm(field: Field, raster: &Raster, years: (i32, i32)) -> Vec<u8> {
    let (_, ramp) = field.ramp();
    let range = field.range(years);
    let mut out = format!("P6\n{} {}\n255\n", raster.width, raster.height).into_bytes();
    for cell in &raster.cells {
        let rgb = match *cell {
            None => NODATA,
            Some((_, true)) => MASKED,
            Some((v, false)) => colour(ramp, range, v),
        };
        out.extend_from_slice(&rgb);
    }
    out
}

/// Numeric companion of a raster: header `lat,<lon...>`, rows north to
/// south, empty where there is no result. Masked cells keep their value.
pub fn grid_csv(axes: &Axes, raster: &Raster) -> String {
    let mut s = String::from("lat");
    for lon in &axes.lons {
        s.push(',');
        s.push_str(&lon.to_string());
    }
    s.push('\n');
    for row in 0..raster.height {
        s.push_str(&axes.lats[raster.height - 1 - row].to_string());
        for col in 0..raster.width {
            s.push(',');
            if let Some((v, _)) = raster.cells[row * raster.width + col] {
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
    }
    s
}

pub fn legend(field: Field, raster: &Raster, years: (i32, i32)) -> Value {
    let (name, ramp) = field.ramp();
    let range = field.range(years);
    let stops: Vec<Value> = ramp
        .iter()
        .enumerate()
        .map(|(k, rgb)| json!({ "value": range.0 + (range.1 - range.0) * k as f64 / 4.0, "rgb": rgb }))
        .collect();
    let mut v = json!({
        "field": field.name(),
        "unit": field.unit(),
        "range": [range.0, range.1],
        "ramp": name,
        "stops": stops,
        "interpolation": "linear between stops, clamped outside the range",
        "nodata_rgb": NODATA,
        "masked_rgb": field.masks_single().then_some(MASKED),
        "masked_cells": if field.masks_single() { "single-line model preferred by BIC" } else { "none" },
        "orientation": "row 0 northernmost latitude, column 0 westernmost longitude",
        "width": raster.width,
        "height": raster.height,
    });
    if matches!(field, Field::A1 | Field::A2 | Field::SlopeDiff) {
        v["range_per_century"] = json!([range.0 * 100.0, range.1 * 100.0]);
    }
    v
}
