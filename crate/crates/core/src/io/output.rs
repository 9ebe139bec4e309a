//! Deterministic CSV and JSON writers.
//!
//! Numbers are written with 12 significant digits in Rust's own float
//! formatting, which ignores the process locale; lines end in `\n`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::analysis::SpectrumResult;
use crate::dynamics::excitation_expectations;
use crate::ensemble::AveragedResult;
use crate::error::{invalid, Result};

/// Named columns sharing one time axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeseriesTable {
    pub time_grid: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl TimeseriesTable {
    pub fn new(time_grid: Vec<f64>) -> Self {
        Self {
            time_grid,
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push((name.into(), values));
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    /// `q0..qm`, `NRy`, `PRy`.
    pub fn from_averaged(result: &AveragedResult) -> Self {
        let mut t = Self::new(result.histogram.time_grid.clone());
        for (n, row) in result.histogram.q.iter().enumerate() {
            t.push(format!("q{n}"), row.clone());
        }
        let (n_ry, p_ry) = excitation_expectations(&result.histogram);
        t.push("NRy", n_ry);
        t.push("PRy", p_ry);
        t
    }
}

pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}

pub fn write_timeseries_csv(table: &TimeseriesTable, path: &Path) -> Result<()> {
    if table.columns.iter().any(|c| c.1.len() != table.time_grid.len()) {
        return Err(invalid("every column must match the time grid length"));
    }
    let mut s = String::from("t_us");
    for (name, _) in &table.columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (j, t) in table.time_grid.iter().enumerate() {
        s.push_str(&format_value(*t));
        for (_, col) in &table.columns {
            s.push(',');
            s.push_str(&format_value(col[j]));
        }
        s.push('\n');
    }
    write_atomically(path, s.as_bytes())
}

pub fn read_timeseries_csv(path: &Path) -> Result<TimeseriesTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| invalid("empty CSV file"))?.split(',').collect();
    if header.first().map(|h| h.trim()) != Some("t_us") {
        return Err(invalid("first CSV column must be t_us"));
    }
    let mut table = TimeseriesTable::new(Vec::new());
    for name in &header[1..] {
        table.push(name.trim(), Vec::new());
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(invalid(format!("CSV row {} has {} fields, expected {}", i + 2, fields.len(), header.len())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("CSV row {}: cannot parse `{s}`", i + 2)))
        };
        table.time_grid.push(parse(fields[0])?);
        for (col, f) in table.columns.iter_mut().zip(&fields[1..]) {
            col.1.push(parse(f)?);
        }
    }
    Ok(table)
}

/// Long-format surface: one row per `(axis value, time)`.
pub fn write_grid_csv(path: &Path, axis_name: &str, axis: &[f64], time_grid: &[f64], values: &[Vec<f64>]) -> Result<()> {
    if values.len() != axis.len() || values.iter().any(|v| v.len() != time_grid.len()) {
        return Err(invalid("grid values do not match the axes"));
    }
    let mut s = format!("{axis_name},t_us,value\n");
    for (a, row) in axis.iter().zip(values) {
        for (t, v) in time_grid.iter().zip(row) {
            s.push_str(&format!("{},{},{}\n", format_value(*a), format_value(*t), format_value(*v)));
        }
    }
    write_atomically(path, s.as_bytes())
}

/// Frequencies and one magnitude column per spectrum (all on the same axis).
pub fn write_spectrum_csv(path: &Path, spectra: &[(&str, &SpectrumResult)]) -> Result<()> {
    let first = spectra.first().ok_or_else(|| invalid("no spectra to write"))?.1;
    if spectra.iter().any(|s| s.1.frequencies.len() != first.frequencies.len()) {
        return Err(invalid("spectra have different frequency axes"));
    }
    let mut s = String::from("f_mhz");
    for (name, _) in spectra {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (k, f) in first.frequencies.iter().enumerate() {
        s.push_str(&format_value(*f));
        for (_, sp) in spectra {
            s.push(',');
            s.push_str(&format_value(sp.magnitudes[k]));
        }
        s.push('\n');
    }
    write_atomically(path, s.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomically(path, s.as_bytes())
}
