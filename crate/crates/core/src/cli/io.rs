use std::fmt::Write as _;
use std::path::Path;

use crate::data::ObservationMatrix;
use crate::error::{invalid_input, Error, Result};
use crate::gauss::SiteSet;
use crate::margins::MarginScale;

/// Observation panel as read from disk.
#[derive(Debug, Clone)]
pub struct Panel {
    pub ids: Vec<String>,
    pub sites: Vec<String>,
    pub data: ObservationMatrix,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn parse_cell(cell: &str, what: &str) -> Result<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>().map_err(|_| Error::InvalidInput(format!("cannot parse {what} value {cell:?}")))
}

/// First column is a replicate id or date; the remaining columns are sites.
/// Empty cells are missing.
pub fn read_observations(path: &Path, scale: MarginScale) -> Result<Panel> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return invalid_input(format!("{} needs an id column and at least one site column", path.display()));
    }
    let sites: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return invalid_input(format!("row {} has {} fields, expected {}", ids.len() + 1, rec.len(), header.len()));
        }
        ids.push(rec[0].to_string());
        rows.push(rec.iter().skip(1).map(|c| parse_cell(c, "observation")).collect::<Result<Vec<f64>>>()?);
    }
    let data = if rows.is_empty() {
        ObservationMatrix::filled(0, sites.len(), f64::NAN, scale)
    } else {
        ObservationMatrix::from_rows(&rows, scale)?
    };
    Ok(Panel { ids, sites, data })
}

pub fn write_observations(ids: &[String], sites: &[String], data: &ObservationMatrix) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(sites.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in data.rows().enumerate() {
        let mut rec = vec![ids[i].clone()];
        rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Stations CSV with columns `id, x, y`.
pub fn read_stations(path: &Path) -> Result<SiteSet> {
    let mut rdr = reader(path)?;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return invalid_input(format!("station rows need id, x, y; found {} fields", rec.len()));
        }
        labels.push(rec[0].to_string());
        let x = parse_cell(&rec[1], "x")?;
        let y = parse_cell(&rec[2], "y")?;
        if !(x.is_finite() && y.is_finite()) {
            return invalid_input(format!("station {} has missing coordinates", &rec[0]));
        }
        coords.push([x, y]);
    }
    SiteSet::new(coords, labels)
}

pub fn write_stations(sites: &SiteSet) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["id", "x", "y"])?;
    for (l, c) in sites.labels.iter().zip(&sites.coords) {
        w.write_record([l.clone(), c[0].to_string(), c[1].to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Generic table with a header row.
pub fn write_table(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => String::new(),
    }
}

pub fn fmt_num(v: f64) -> String {
    fmt_opt(Some(v))
}

/// Flat `key = value` document.
pub fn key_values(pairs: &[(String, String)]) -> Vec<u8> {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.into_bytes()
}
