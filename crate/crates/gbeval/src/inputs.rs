//! Matching files across two directories by stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub id: String,
    pub left: PathBuf,
    pub right: PathBuf,
}

fn is_png(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

/// PNG files directly inside `dir`, keyed by stem.
pub fn list_pngs(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(Error::io(dir))? {
        let path = entry.map_err(Error::io(dir))?.path();
        if path.is_file() && is_png(&path) {
            if let Some(prev) = out.insert(stem(&path), path.clone()) {
                return Err(Error::Input(format!(
                    "{} and {} share a stem",
                    prev.display(),
                    path.display()
                )));
            }
        }
    }
    Ok(out)
}

/// Pairs two files, or the PNGs of two directories by stem.
///
/// Every file must have a partner; the error lists those that do not.
pub fn pair_paths(left: &Path, right: &Path) -> Result<Vec<Pair>> {
    if left.is_file() && right.is_file() {
        return Ok(vec![Pair {
            id: stem(left),
            left: left.to_path_buf(),
            right: right.to_path_buf(),
        }]);
    }
    for p in [left, right] {
        if !p.is_dir() {
            return Err(Error::Input(format!(
                "{} is not a directory (pass two files or two directories)",
                p.display()
            )));
        }
    }
    let mut a = list_pngs(left)?;
    let mut b = list_pngs(right)?;
    let mut unpaired: Vec<String> = Vec::new();
    unpaired.extend(
        a.iter()
            .filter(|(k, _)| !b.contains_key(*k))
            .map(|(_, p)| p.display().to_string()),
    );
    unpaired.extend(
        b.iter()
            .filter(|(k, _)| !a.contains_key(*k))
            .map(|(_, p)| p.display().to_string()),
    );
    if !unpaired.is_empty() {
        return Err(Error::Input(format!(
            "unpaired files:\n  {}",
            unpaired.join("\n  ")
        )));
    }
    if a.is_empty() {
        return Err(Error::Input(format!(
            "no PNG files in {} or {}",
            left.display(),
            right.display()
        )));
    }
    let keys: Vec<String> = a.keys().cloned().collect();
    Ok(keys
        .into_iter()
        .map(|id| Pair {
            left: a.remove(&id).expect("key from a"),
            right: b.remove(&id).expect("paired"),
            id,
        })
        .collect())
}

/// A single file or every PNG in a directory, as `(stem, path)`.
pub fn files_or_dir(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    if path.is_file() {
        return Ok(vec![(stem(path), path.to_path_buf())]);
    }
    if !path.is_dir() {
        return Err(Error::Input(format!("{} does not exist", path.display())));
    }
    let files: Vec<_> = list_pngs(path)?.into_iter().collect();
    if files.is_empty() {
        return Err(Error::Input(format!("no PNG files in {}", path.display())));
    }
    Ok(files)
}
