//! CSV and JSON writers. Floats use the shortest representation that parses
//! back to the same value.

use std::fs;
use std::path::Path;

use kstw::integrate::Trajectory;
use kstw::profiles::WaveProfile;
use serde::Serialize;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Shortest round-trip text, in exponent form for very small or large values.
pub fn fmt_f64(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && m.is_finite() && !(1e-4..1e16).contains(&m) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x))).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>) -> Result<(), CliError> {
    write_rows(path, ["s", "w", "v", "I"], traj.samples.iter().map(|x| [x.s, x.w, x.v, x.i]))
}

pub fn write_profile(path: &Path, profile: &WaveProfile<f64>) -> Result<(), CliError> {
    write_rows(path, ["s", "u", "S"], profile.samples.iter().map(|x| [x.s, x.u, x.big_s]))
}

/// Rows of string cells, for tables with text columns.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads back a numeric CSV written by [`write_rows`].
#[cfg(test)]
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec.iter().map(|x| x.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|e| io_err(path, e))?;
        rows.push(row);
    }
    Ok((header, rows))
}
