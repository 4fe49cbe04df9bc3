//! CSV panels, JSON documents and file digests.
//!
//! Panels are `date,<ticker1>,...` with ISO dates and decimal returns. Floats
//! are written in their shortest round-trip form, so write → read → write is
//! byte-stable.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use synthmarket_core::{Date, ReturnsPanel};

use crate::error::{CliError, Result};

pub fn read_panel(path: &Path) -> Result<ReturnsPanel> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_panel(&bytes).map_err(|msg| CliError::parse(path, msg))
}

/// Parses panel CSV text. Empty or absent cells become missing values.
pub fn parse_panel(bytes: &[u8]) -> std::result::Result<ReturnsPanel, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.get(0).map(str::trim) != Some("date") {
        return Err("first header column must be \"date\"".into());
    }
    let tickers: Vec<String> = header.iter().skip(1).map(|t| t.trim().to_string()).collect();
    let d = tickers.len();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() > d + 1 {
            return Err(format!("row {i} has {} cells, header has {}", rec.len(), d + 1));
        }
        let date: Date = rec[0].trim().parse().map_err(|e| format!("row {i}: {e}"))?;
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let cell = rec.get(j + 1).map(str::trim).unwrap_or("");
            if cell.is_empty() {
                return Err(format!("missing value at ({i},{j})"));
            }
            row.push(cell.parse().map_err(|_| format!("row {i}, column {}: not a number: {cell:?}", j + 1))?);
        }
        dates.push(date);
        rows.push(row);
    }
    ReturnsPanel::from_rows(dates, tickers, &rows).map_err(|e| e.to_string())
}

pub fn panel_to_csv(panel: &ReturnsPanel) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(panel.tickers().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    let v = panel.values();
    let mut rec = Vec::with_capacity(panel.d() + 1);
    for (i, date) in panel.dates().iter().enumerate() {
        rec.clear();
        rec.push(date.to_string());
        rec.extend((0..panel.d()).map(|j| v[(i, j)].to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_panel(path: &Path, panel: &ReturnsPanel) -> Result<()> {
    write_bytes(path, &panel_to_csv(panel))
}

/// Writes `bytes`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::parse(path, e))
}

/// Rows of optional numbers; `None` becomes an empty cell.
pub fn table_to_csv(header: &[&str], rows: &[Vec<Option<f64>>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.iter().map(|c| c.map(|x| x.to_string()).unwrap_or_default())).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| CliError::io(path, e))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_file_parses() {
        let p = parse_panel(b"date,A,B\n2020-01-02,0.01,-0.02\n2020-01-03,0,1e-3\n2020-01-06,0.5,0.25\n").unwrap();
        assert_eq!((p.n(), p.d()), (3, 2));
        assert_eq!(p.tickers(), ["A", "B"]);
        assert_eq!(p.values()[(1, 1)], 0.001);
    }

    #[test]
    fn missing_cells_and_bad_dates_are_reported() {
        let err = parse_panel(b"date,A,B\n2020-01-02,0.01,\n").unwrap_err();
        assert!(err.contains("missing value at (0,1)"), "{err}");
        let err = parse_panel(b"date,A,B\n2020-01-02,0.01\n").unwrap_err();
        assert!(err.contains("missing value"), "{err}");
        let err = parse_panel(b"date,A\n2020-01-02,0.01\n2020-01-01,0.02\n").unwrap_err();
        assert!(err.contains("dates not increasing"), "{err}");
    }

    #[test]
    fn csv_round_trip_is_byte_stable() {
        let src = b"date,A,B\n2020-01-02,0.1,-0.30000000000000004\n2020-01-03,1e-300,0.012345678901234568\n";
        let p = parse_panel(src).unwrap();
        let once = panel_to_csv(&p);
        let back = parse_panel(&once).unwrap();
        assert_eq!(back, p);
        assert_eq!(panel_to_csv(&back), once);
    }
}
