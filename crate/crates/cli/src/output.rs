use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// One CSV column: name, unit and the module that produced it.
#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub unit: &'static str,
    pub source: &'static str,
}

pub fn col(name: impl Into<String>, unit: &'static str, source: &'static str) -> Column {
    Column { name: name.into(), unit, source }
}

/// 17 significant digits, enough to round-trip any double.
pub fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn csv_text(columns: &[Column], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    let header: Vec<String> = columns.iter().map(|c| format!("{} [{}] ({})", c.name, c.unit, c.source)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let cells: Vec<String> = row.iter().map(|&x| number(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// Collects the files of one run under the output directory.
#[derive(Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

impl Bundle {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.artifacts.push(Artifact { file: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, columns: &[Column], rows: &[Vec<f64>]) -> std::io::Result<()> {
        self.write(name, &csv_text(columns, rows))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, &text)
    }
}
