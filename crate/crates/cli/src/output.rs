//! Artifact emission: CSV tables with fixed float formatting, JSON
//! documents, content digests and the run manifest.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Fixed 17-significant-digit rendering, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Site list rendered as space-separated coordinates `x` or `x:y:…`.
pub fn fmt_coords(coords: &[Vec<i64>]) -> String {
    coords
        .iter()
        .map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(":"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A named artifact held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// In-memory CSV table with a header row.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        self.writer.write_record(&fields).expect("in-memory write");
    }

    pub fn finish(self, name: impl Into<String>) -> Artifact {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        Artifact { name: name.into(), bytes }
    }
}

pub fn json_artifact<T: Serialize>(name: impl Into<String>, value: &T) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    Artifact { name: name.into(), bytes }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write an artifact into `dir`.
pub fn write(dir: &Path, artifact: &Artifact) -> std::io::Result<()> {
    fs::write(dir.join(&artifact.name), &artifact.bytes)
}

/// Per-suite summary recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteRecord {
    pub suite: String,
    pub files: Vec<String>,
    pub verdicts: usize,
    pub failures: usize,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Run manifest: inputs digest, versions, timings and artifact digests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub config_digest: String,
    pub suites: Vec<SuiteRecord>,
    pub artifacts: Vec<(String, String)>,
    pub exit_code: i32,
}
