//! Output files. Every artifact embeds the config hash so a result can be
//! traced back to the exact settings that produced it, and floats are written
//! with 17 significant digits so CSV round-trips are lossless.

use acim_core::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Output directory precedence: config, then ACIM_OUTPUT_DIR, then cwd.
pub fn output_dir(config_dir: Option<&str>) -> PathBuf {
    if let Some(dir) = config_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("ACIM_OUTPUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

fn io_error(path: &Path, err: std::io::Error) -> Error {
    Error::Parameter(format!("cannot write {}: {err}", path.display()))
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    config_hash: &str,
    header: &str,
    rows: &[Vec<String>],
) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_error(&path, e))?;
    }
    let mut buf = String::new();
    buf.push_str(&format!("# config_sha256: {config_hash}\n"));
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut file = std::fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    file.write_all(buf.as_bytes()).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Serializes `report` with a `config_sha256` field spliced in at the top level.
pub fn write_json<T: serde::Serialize>(
    dir: &Path,
    name: &str,
    config_hash: &str,
    report: &T,
) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_error(&path, e))?;
    }
    let mut value = serde_json::to_value(report)
        .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Internal("report did not serialize to an object".into()))?;
    obj.insert("config_sha256".into(), serde_json::Value::String(config_hash.into()));
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
    let mut file = std::fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_error(&path, e))?;
    file.write_all(b"\n").map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Reads a density CSV produced by the `density` command: a `# config_sha256`
/// comment, an `i,h` header, then one cell value per line.
pub fn read_density_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("i,") {
            continue;
        }
        let cell = line.split(',').nth(1).ok_or_else(|| {
            Error::Parameter(format!("{}: malformed row '{line}'", path.display()))
        })?;
        let value: f64 = cell.trim().parse().map_err(|_| {
            Error::Parameter(format!("{}: malformed value '{cell}'", path.display()))
        })?;
        values.push(value);
    }
    if values.len() < 2 {
        return Err(Error::Parameter(format!(
            "{}: expected at least 2 density values, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}
