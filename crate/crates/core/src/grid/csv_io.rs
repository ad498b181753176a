//! Long-format CSV grids, one row per cell-year (or cell-day).

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};

use super::{CellStatus, GridDataset, InvalidReason, LoadedGrid};
use crate::error::{Error, Result};

pub const GRID_HEADER: [&str; 5] = ["lat", "lon", "land", "year", "value"];
pub const DAILY_HEADER: [&str; 5] = ["lat", "lon", "land", "date", "value"];
pub const DEFAULT_MIN_DAYS: usize = 300;

/// Mean of the daily values of one calendar year, or `None` when fewer than
/// `min_days` finite values are present. Leap years are averaged over all
/// their days like any other year. Dates outside the first date's year make
/// the year unusable.
pub fn daily_to_annual(days: &[(NaiveDate, f64)], min_days: usize) -> Option<f64> {
    let year = days.first()?.0.year();
    if days.iter().any(|(d, _)| d.year() != year) {
        return None;
    }
    let present: Vec<f64> = days.iter().map(|&(_, v)| v).filter(|v| v.is_finite()).collect();
    if present.is_empty() || present.len() < min_days {
        return None;
    }
    Some(crate::scalar::accurate_sum(present.iter().copied()) / present.len() as f64)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn from_csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(line, format!("{kind:?}")),
    }
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64> {
    field.parse::<f64>().map_err(|_| parse_err(line, format!("{name} {field:?} is not a number")))
}

fn parse_land(field: &str, line: u64) -> Result<bool> {
    match field {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        _ => Err(parse_err(line, format!("land flag {field:?} is not 0/1"))),
    }
}

fn parse_value(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() || field.eq_ignore_ascii_case("nan") || field == "NA" {
        return Ok(None);
    }
    let v = parse_f64(field, "value", line)?;
    Ok(v.is_finite().then_some(v))
}

struct Row<K> {
    line: u64,
    lat: f64,
    lon: f64,
    land: bool,
    key: K,
    value: Option<f64>,
}

fn read_rows<R: Read, K>(
    reader: R,
    header: &[&str; 5],
    parse_key: impl Fn(&str, u64) -> Result<K>,
) -> Result<Vec<Row<K>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr
        .headers()
        .map_err(from_csv_error)?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    if found != header.iter().map(|s| s.to_string()).collect::<Vec<_>>() {
        return Err(parse_err(1, format!("expected header {:?}, found {found:?}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", rec.len())));
        }
        // +0.0 folds a negative zero onto zero
        let lat = parse_f64(&rec[0], "lat", line)? + 0.0;
        let lon = parse_f64(&rec[1], "lon", line)? + 0.0;
        if !(lat.abs() <= 90.0) {
            return Err(parse_err(line, format!("latitude {lat} outside [-90, 90]")));
        }
        if !lon.is_finite() {
            return Err(parse_err(line, format!("longitude {lon} not finite")));
        }
        rows.push(Row {
            line,
            lat,
            lon,
            land: parse_land(&rec[2], line)?,
            key: parse_key(&rec[3], line)?,
            value: parse_value(&rec[4], line)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Structure("grid file holds no data rows".into()));
    }
    Ok(rows)
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn position(axis: &[f64], x: f64) -> usize {
    axis.binary_search_by(|a| a.total_cmp(&x)).expect("coordinate on axis")
}

/// Cell layout shared by the annual and daily readers.
struct Layout {
    lats: Vec<f64>,
    lons: Vec<f64>,
    land: Vec<Option<bool>>,
}

impl Layout {
    fn new<K>(rows: &[Row<K>]) -> Self {
        let lats = sorted_unique(rows.iter().map(|r| r.lat).collect());
        let lons = sorted_unique(rows.iter().map(|r| r.lon).collect());
        let land = vec![None; lats.len() * lons.len()];
        Self { lats, lons, land }
    }

    fn cell<K>(&mut self, row: &Row<K>) -> Result<usize> {
        let c = position(&self.lats, row.lat) * self.lons.len() + position(&self.lons, row.lon);
        match self.land[c] {
            Some(flag) if flag != row.land => Err(Error::Structure(format!(
                "line {}: land flag of cell ({}, {}) conflicts with earlier rows",
                row.line, row.lat, row.lon
            ))),
            _ => {
                self.land[c] = Some(row.land);
                Ok(c)
            }
        }
    }
}

fn year_span(years: impl Iterator<Item = i32>) -> Result<(i32, usize)> {
    let present: std::collections::BTreeSet<i32> = years.collect();
    let (first, last) = match (present.first(), present.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Structure("no years present".into())),
    };
    if let Some(gap) = (first..=last).find(|y| !present.contains(y)) {
        return Err(Error::Structure(format!(
            "year {gap} absent from every cell while the file spans {first}..{last}"
        )));
    }
    Ok((first, (last - first + 1) as usize))
}

fn finish(layout: Layout, start_year: i32, n_years: usize, values: Vec<f64>, rows: usize) -> Result<LoadedGrid> {
    let has_row: Vec<bool> = layout.land.iter().map(Option::is_some).collect();
    let land = layout.land.iter().map(|l| l.unwrap_or(false)).collect();
    let dataset = GridDataset::with_presence(layout.lats, layout.lons, land, start_year, n_years, values, &has_row)?;
    let report = dataset.report(rows);
    Ok(LoadedGrid { dataset, report })
}

/// Annual grid CSV with header `lat,lon,land,year,value`. An empty value or
/// `NaN` marks a missing year.
pub fn read_csv<R: Read>(reader: R) -> Result<LoadedGrid> {
    let rows = read_rows(reader, &GRID_HEADER, |f, line| {
        f.parse::<i32>().map_err(|_| parse_err(line, format!("year {f:?} is not an integer")))
    })?;
    let (start_year, n_years) = year_span(rows.iter().map(|r| r.key))?;
    let mut layout = Layout::new(&rows);
    let mut values = vec![f64::NAN; layout.land.len() * n_years];
    let mut seen = vec![false; values.len()];
    for row in &rows {
        let c = layout.cell(row)?;
        let slot = c * n_years + (row.key - start_year) as usize;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::Structure(format!(
                "line {}: duplicate row for cell ({}, {}) year {}",
                row.line, row.lat, row.lon, row.key
            )));
        }
        values[slot] = row.value.unwrap_or(f64::NAN);
    }
    finish(layout, start_year, n_years, values, rows.len())
}

/// Daily grid CSV with header `lat,lon,land,date,value` (ISO dates),
/// reduced to annual means with [`daily_to_annual`].
pub fn read_daily_csv<R: Read>(reader: R, min_days: usize) -> Result<LoadedGrid> {
    let rows = read_rows(reader, &DAILY_HEADER, |f, line| {
        NaiveDate::parse_from_str(f, "%Y-%m-%d").map_err(|e| parse_err(line, format!("date {f:?}: {e}")))
    })?;
    let (start_year, n_years) = year_span(rows.iter().map(|r| r.key.year()))?;
    let mut layout = Layout::new(&rows);
    let mut days: BTreeMap<(usize, i32), Vec<(NaiveDate, f64)>> = BTreeMap::new();
    let mut seen: HashSet<(usize, NaiveDate)> = HashSet::new();
    for row in &rows {
        let c = layout.cell(row)?;
        if !seen.insert((c, row.key)) {
            return Err(Error::Structure(format!(
                "line {}: duplicate row for cell ({}, {}) date {}",
                row.line, row.lat, row.lon, row.key
            )));
        }
        days.entry((c, row.key.year())).or_default().push((row.key, row.value.unwrap_or(f64::NAN)));
    }
    let mut values = vec![f64::NAN; layout.land.len() * n_years];
    for ((c, year), d) in &days {
        if let Some(v) = daily_to_annual(d, min_days) {
            values[c * n_years + (year - start_year) as usize] = v;
        }
    }
    finish(layout, start_year, n_years, values, rows.len())
}

/// Writes every cell that has data; missing years become empty values.
/// Floats use the shortest representation that reads back exactly.
pub fn write_csv<W: Write>(dataset: &GridDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(GRID_HEADER).map_err(from_csv_error)?;
    for c in 0..dataset.n_cells() {
        if dataset.status(c) == CellStatus::Invalid(InvalidReason::NoData) {
            continue;
        }
        let (lat, lon) = dataset.coords(c);
        let land = if dataset.is_land(c) { "1" } else { "0" };
        for (y, v) in dataset.cell_values(c).iter().enumerate() {
            let value = if v.is_nan() { String::new() } else { v.to_string() };
            let year = (dataset.start_year() + y as i32).to_string();
            w.write_record([lat.to_string().as_str(), &lon.to_string(), land, &year, &value])
                .map_err(from_csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}
