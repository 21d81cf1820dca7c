//! Dataset manifest: `path,label,fold` rows driving the cross-validation split.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Number of cross-validation folds; manifest `fold` values are `0..N_FOLDS`.
pub const N_FOLDS: usize = 5;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
    pub fold: usize,
}

/// Loads and validates a manifest CSV with header `path,label,fold`.
///
/// Paths are kept as written; callers resolve them relative to the manifest's
/// parent directory. Duplicate paths, labels outside {0, 1}, and folds
/// outside `0..5` are rejected.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| manifest_err(path, 0, e.to_string()))?;

    {
        let headers = reader
            .headers()
            .map_err(|e| manifest_err(path, 1, e.to_string()))?;
        let expected = ["path", "label", "fold"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(manifest_err(
                path,
                1,
                format!(
                    "expected header `path,label,fold`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
    }

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| manifest_err(path, line, e.to_string()))?;
        if record.len() != 3 {
            return Err(manifest_err(
                path,
                line,
                format!("expected 3 fields, got {}", record.len()),
            ));
        }
        let file = &record[0];
        if file.is_empty() {
            return Err(manifest_err(path, line, "empty path".into()));
        }
        let label = record[1]
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| manifest_err(path, line, format!("unknown label `{}`", &record[1])))?;
        let fold: usize = record[2]
            .parse()
            .ok()
            .filter(|f| *f < N_FOLDS)
            .ok_or_else(|| {
                manifest_err(
                    path,
                    line,
                    format!("fold `{}` outside 0..{N_FOLDS}", &record[2]),
                )
            })?;
        if !seen.insert(file.to_string()) {
            return Err(manifest_err(path, line, format!("duplicate path `{file}`")));
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(file),
            label,
            fold,
        });
    }
    if entries.is_empty() {
        return Err(manifest_err(path, 0, "manifest has no entries".into()));
    }
    Ok(entries)
}

fn manifest_err(path: &Path, line: usize, reason: String) -> Error {
    Error::Manifest {
        path: path.into(),
        line,
        reason,
    }
}
