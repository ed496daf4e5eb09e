//! Output files: CSV tables, SVG charts, run manifests, and the command
//! layer behind the `rnn-introspect` binary.

pub mod commands;
pub mod csv;
pub mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checkpoint::write_atomic;

/// Manifest file name written into every output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Record of one command invocation. Written after every other output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<OutputRecord>,
    pub outputs: Vec<OutputRecord>,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files as they are written so the manifest can list them.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn new(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Atomically writes `name` and records its checksum.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, bytes)?;
        self.written.retain(|r| r.path != name);
        self.written.push(OutputRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn written(&self) -> &[OutputRecord] {
        &self.written
    }

    /// Writes the manifest; call last.
    pub fn finish(self, mut manifest: RunManifest) -> std::io::Result<PathBuf> {
        manifest.outputs = self.written;
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.root.join(MANIFEST_FILE);
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}

/// Checksum record for an input file.
pub fn input_record(path: &Path) -> std::io::Result<OutputRecord> {
    let bytes = std::fs::read(path)?;
    Ok(OutputRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len(),
    })
}
