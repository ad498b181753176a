//! Packed little-endian grid for bulk data.
//!
//! Layout: the 8-byte magic, `u32` n_lat, n_lon, n_years, `i32` start_year,
//! `f64` lats, `f64` lons, one `u8` land flag per cell, then `f64` values
//! lat-major, lon, year, with `NaN` for missing.

use std::io::{Read, Write};

use super::GridDataset;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TBGRID1\0";

fn truncated(what: &str, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Structure(format!("binary grid truncated while reading {what}"))
    } else {
        Error::Io(e)
    }
}

fn read_array<const K: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| truncated(what, e))?;
    Ok(buf)
}

fn read_f64s<R: Read>(r: &mut R, count: usize, what: &str) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf).map_err(|e| truncated(what, e))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GridDataset> {
    if &read_array::<8, _>(&mut r, "magic")? != MAGIC {
        return Err(Error::Structure("missing TBGRID1 magic".into()));
    }
    let n_lat = u32::from_le_bytes(read_array(&mut r, "n_lat")?) as usize;
    let n_lon = u32::from_le_bytes(read_array(&mut r, "n_lon")?) as usize;
    let n_years = u32::from_le_bytes(read_array(&mut r, "n_years")?) as usize;
    let start_year = i32::from_le_bytes(read_array(&mut r, "start_year")?);
    let cells = n_lat
        .checked_mul(n_lon)
        .filter(|c| c.checked_mul(n_years).and_then(|v| v.checked_mul(8)).is_some())
        .ok_or_else(|| Error::Structure("binary grid dimensions overflow".into()))?;
    let lats = read_f64s(&mut r, n_lat, "latitudes")?;
    let lons = read_f64s(&mut r, n_lon, "longitudes")?;
    let mut mask = vec![0u8; cells];
    r.read_exact(&mut mask).map_err(|e| truncated("land mask", e))?;
    if let Some(b) = mask.iter().find(|&&b| b > 1) {
        return Err(Error::Structure(format!("land flag byte {b} is not 0/1")));
    }
    let values = read_f64s(&mut r, cells * n_years, "values")?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Structure("trailing bytes after binary grid".into()));
    }
    GridDataset::new(lats, lons, mask.into_iter().map(|b| b == 1).collect(), start_year, n_years, values)
}

/// Cells without any data are written as all-`NaN` and read back as having
/// missing years.
pub fn write_binary<W: Write>(dataset: &GridDataset, w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::Structure(format!("dimension {n} exceeds u32")));
    w.write_all(MAGIC)?;
    w.write_all(&dim(dataset.lats().len())?.to_le_bytes())?;
    w.write_all(&dim(dataset.lons().len())?.to_le_bytes())?;
    w.write_all(&dim(dataset.n_years())?.to_le_bytes())?;
    w.write_all(&dataset.start_year().to_le_bytes())?;
    for x in dataset.lats().iter().chain(dataset.lons()) {
        w.write_all(&x.to_le_bytes())?;
    }
    let mask: Vec<u8> = dataset.land_mask().iter().map(|&l| l as u8).collect();
    w.write_all(&mask)?;
    for v in dataset.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridDataset {
        let values = vec![0.1, -2.5, f64::NAN, 1e-300, 3.0, 4.0, 5.5, 6.25];
        GridDataset::new(vec![-10.0, 10.0], vec![5.0, 15.0], vec![true, false, true, true], 1950, 2, values).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = sample();
        let mut buf = Vec::new();
        write_binary(&g, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 16 + 8 * 4 + 4 + 8 * 8);
        let back = read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.lats(), g.lats());
        assert_eq!(back.land_mask(), g.land_mask());
        for (a, b) in back.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.status(1), g.status(1));
    }

    #[test]
    fn rejects_damaged_files() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert!(matches!(read_binary(&buf[..buf.len() - 3]), Err(Error::Structure(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_binary(extra.as_slice()), Err(Error::Structure(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_binary(bad.as_slice()), Err(Error::Structure(_))));
    }
}
