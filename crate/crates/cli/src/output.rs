//! CSV and JSON rendering plus the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const SCHEMA: u32 = 1;

/// One emitted file, held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(&self.bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Shortest round-trip representation, in exponent form outside
/// [1e-4, 1e9); non-finite and missing values are written as `nan`.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        "nan".to_string()
    } else if v == 0.0 || (1e-4..1e9).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), num)
}

/// JSON number, or null for missing and non-finite values.
pub fn jnum(v: Option<f64>) -> Value {
    match v {
        Some(x) if x.is_finite() => json!(x),
        _ => Value::Null,
    }
}

#[derive(Debug, Default)]
pub struct Csv {
    body: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv::default();
        c.body.push_str(&header.join(","));
        c.body.push('\n');
        c
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for cell in cells {
            if !first {
                self.body.push(',');
            }
            self.body.push_str(cell.as_ref());
            first = false;
        }
        self.body.push('\n');
    }

    pub fn comment(&mut self, text: &str) {
        self.body.push_str("# ");
        self.body.push_str(text);
        self.body.push('\n');
    }

    pub fn into_artifact(self, name: String) -> Artifact {
        Artifact {
            name,
            bytes: self.body.into_bytes(),
        }
    }
}

pub fn json_artifact(name: String, value: &Value) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact { name, bytes })
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: String,
    pub config: Value,
    pub wall_time_s: f64,
    pub failures: usize,
    pub files: Vec<FileEntry>,
    pub warnings: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes every artifact into `dir` and then the manifest listing them.
/// Returns the paths written, manifest last.
pub fn write_all(dir: &Path, artifacts: &[Artifact], manifest: &Manifest) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(io(&path))?;
        written.push(path);
    }
    let path = dir.join(MANIFEST_NAME);
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

pub fn file_entries(artifacts: &[Artifact]) -> Vec<FileEntry> {
    artifacts
        .iter()
        .map(|a| FileEntry {
            name: a.name.clone(),
            sha256: a.sha256(),
            bytes: a.bytes.len(),
        })
        .collect()
}
