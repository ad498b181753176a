//! `year,value` CSV for single series.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::series::AnnualSeries;

pub const SERIES_HEADER: [&str; 2] = ["year", "value"];

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Reads a complete series; years must be consecutive and ascending.
pub fn read_series_csv<R: Read>(reader: R) -> Result<AnnualSeries<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    if header != SERIES_HEADER {
        return Err(parse_err(1, format!("expected header \"year,value\", found {header:?}")));
    }
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let year = rec[0].parse::<i32>().map_err(|_| parse_err(line, format!("year {:?} is not an integer", &rec[0])))?;
        let value = rec[1].parse::<f64>().map_err(|_| parse_err(line, format!("value {:?} is not a number", &rec[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("value {:?} is not finite", &rec[1])));
        }
        if let Some(&(prev, _)) = pairs.last() {
            if year != prev + 1 {
                return Err(Error::Structure(format!("line {line}: year {year} follows {prev}; years must be consecutive")));
            }
        }
        pairs.push((year, value));
    }
    AnnualSeries::from_pairs(&pairs)
}

pub fn write_series_csv<W: Write>(series: &AnnualSeries<f64>, mut w: W) -> Result<()> {
    writeln!(w, "year,value")?;
    for (i, v) in series.values().iter().enumerate() {
        writeln!(w, "{},{v}", series.year_of(i + 1))?;
    }
    w.flush()?;
    Ok(())
}
