//! Run manifest: what was run, on which input, and what it produced.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use metaoptics::export::write_atomic;
use metaoptics::{canonical_text, Result};

/// Hex SHA-256 of the canonicalised scenario text.
pub fn scenario_hash(text: &str) -> String {
    hex::encode(Sha256::digest(canonical_text(text).as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: PathBuf,
    pub scenario_sha256: String,
    pub tool_version: String,
    pub dimensionless: bool,
    pub n_quad: usize,
    pub outputs: Vec<PathBuf>,
    pub timing: Vec<Stage>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, self)?;
            writeln!(w)
        })
    }
}
