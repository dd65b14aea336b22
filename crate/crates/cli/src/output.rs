//! Artifacts: a JSON envelope with run metadata, optional CSV tables,
//! and atomic writes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use twisted_eisenstein::config::RunConfig;
use twisted_eisenstein::linalg::{to_pairs, CMat};

/// What a command produced, before it is wrapped and written.
pub struct Artifact {
    pub result: Value,
    pub table: Option<Table>,
    /// False when any truncation failed its enlargement or stability test.
    pub saturated: bool,
    pub notes: Vec<String>,
}

/// A CSV table of plain numbers and identifiers.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn cx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn mat(m: &CMat) -> Value {
    json!(to_pairs(m))
}

pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// The metadata wrapper shared by every output.
pub fn envelope(cfg: &RunConfig, hash: &str, art: &Artifact, result: Value) -> Value {
    json!({
        "program": "twisted-eisenstein",
        "versions": {
            "cli": env!("CARGO_PKG_VERSION"),
            "core": twisted_eisenstein::VERSION,
        },
        "config_sha256": hash,
        "seed": cfg.seed,
        "command": cfg.command.name(),
        "truncation": {
            "word_length": cfg.truncation.word_length,
            "c_max": cfg.truncation.c_max,
            "k_max": cfg.truncation.k_max,
            "rel_tol": cfg.truncation.rel_tol,
        },
        "saturated": art.saturated,
        "notes": art.notes,
        "result": result,
    })
}

/// Sidecar path carrying the metadata of a CSV table.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes to a temporary file in the target directory, then renames it
/// over the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Writes the artifact: the JSON envelope, or the CSV table plus its
/// metadata sidecar.
pub fn emit(cfg: &RunConfig, hash: &str, art: Artifact, path: &Path) -> io::Result<Vec<PathBuf>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    match &art.table {
        Some(t) => {
            let meta = envelope(cfg, hash, &art, json!({ "table": path.file_name().map(|n| n.to_string_lossy()), "rows": t.rows.len(), "columns": t.header }));
            write_atomic(path, t.render().as_bytes())?;
            let mp = meta_path(path);
            write_atomic(&mp, pretty(&meta).as_bytes())?;
            Ok(vec![path.to_path_buf(), mp])
        }
        None => {
            let doc = envelope(cfg, hash, &art, art.result.clone());
            write_atomic(path, pretty(&doc).as_bytes())?;
            Ok(vec![path.to_path_buf()])
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}
