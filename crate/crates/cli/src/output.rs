use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        write_csv(&self.path(name), header, rows)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => CliError::Io(e),
        other => CliError::Input(format!("{other:?}")),
    }
}

/// Reads a `(t, value)` curve with a header row.
pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        pts.push(rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?);
    }
    if pts.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(pts)
}
