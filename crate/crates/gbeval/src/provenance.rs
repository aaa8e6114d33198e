//! `run.json` records: what ran, on which inputs, and how it ended.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub versions: BTreeMap<&'static str, &'static str>,
    /// SHA-256 of every input file; `null` when the file could not be read.
    pub input_hashes: BTreeMap<String, Option<String>>,
    pub outputs: Vec<String>,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
}

impl Provenance {
    pub fn new(command: &str, args: Vec<String>, seed: u64) -> Self {
        let versions = BTreeMap::from([
            ("gbeval", env!("CARGO_PKG_VERSION")),
            ("gbeval-core", gbeval_core::VERSION),
        ]);
        Self {
            command: command.into(),
            args,
            seed,
            versions,
            input_hashes: BTreeMap::new(),
            outputs: Vec::new(),
            status: "ok",
            exit_code: 0,
            error: None,
        }
    }

    /// Hashes a file, or each file directly inside a directory.
    pub fn add_input(&mut self, path: &Path) {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map(|rd| {
                    rd.filter_map(|e| e.ok())
                        .map(|e| e.path())
                        .filter(|p| p.is_file())
                        .collect()
                })
                .unwrap_or_default();
            files.sort();
            for f in files {
                self.input_hashes
                    .insert(f.display().to_string(), sha256_file(&f).ok());
            }
        } else {
            self.input_hashes
                .insert(path.display().to_string(), sha256_file(path).ok());
        }
    }

    pub fn fail(&mut self, e: &Error) {
        self.status = "error";
        self.exit_code = e.exit_code();
        self.error = Some(e.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RUN_FILE);
        crate::report::write_json(&path, self)?;
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let mut prov = Provenance::new("x", vec![], 1);
        prov.add_input(d.path());
        prov.add_input(&d.path().join("missing"));
        assert_eq!(prov.input_hashes.len(), 2);
        assert!(prov.input_hashes.values().any(Option::is_none));
    }
}
