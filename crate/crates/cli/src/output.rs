//! Output files, run metadata and input digests.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "trendbreak";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bad flags or flag combinations; maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Reads an input file whole and records its digest.
pub fn read_input(path: &Path) -> Result<(Vec<u8>, InputDigest)> {
    let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = InputDigest { path: path.display().to_string(), bytes: data.len() as u64, sha256: sha256_hex(&data) };
    Ok((data, digest))
}

/// Everything needed to reproduce a run. Contains no timestamps, so equal
/// invocations produce equal bytes.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
}

impl Metadata {
    pub fn new(command: &'static str, seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        Ok(Self { tool: TOOL, version: VERSION, command, seed, config: serde_json::to_value(config)?, inputs: Vec::new() })
    }

    pub fn with_input(mut self, input: InputDigest) -> Self {
        self.inputs.push(input);
        self
    }
}

pub fn to_json(metadata: &Metadata, result: impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&json!({ "metadata": metadata, "result": result }))?;
    s.push('\n');
    Ok(s)
}

/// Writes files into the output directory and, on `finish`, a
/// `manifest.json` carrying the metadata and every file's digest.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        self.files.push((name.to_string(), sha256_hex(data)));
        Ok(())
    }

    pub fn finish(self, metadata: &Metadata) -> Result<()> {
        let files: Vec<Value> = self.files.iter().map(|(n, d)| json!({ "name": n, "sha256": d })).collect();
        let mut s = serde_json::to_string_pretty(&json!({ "metadata": metadata, "files": files }))?;
        s.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn num(x: f64) -> String {
    x.to_string()
}
