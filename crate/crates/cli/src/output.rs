use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub type CsvWriter = csv::Writer<BufWriter<File>>;

/// Opens `dir/name`, writes `# ` comment lines, then the header row.
pub fn create_csv(dir: &Path, name: &str, comments: &[String], header: &[&str]) -> Result<(CsvWriter, PathBuf)> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut buf = BufWriter::new(file);
    for c in comments {
        writeln!(buf, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    Ok((w, path))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Shortest round-trip decimal form; `.` separator regardless of locale.
pub fn num(v: f64) -> String {
    format!("{v}")
}
