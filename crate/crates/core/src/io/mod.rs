//! On-disk formats: dataset ingestion, report export, viewer bundles.
//!
//! Every file carries a schema version. JSON output is canonical (sorted
//! keys, shortest round-trip floats) and every write goes through a temp
//! file and a rename.

mod dataset;
pub mod geojson;
mod report;
mod viewer;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::validate::Violation;

pub use dataset::{load_dataset, write_dataset, Manifest, ManifestFiles};
pub use report::{export_report, export_summary, load_report, report_csv};
pub use viewer::{
    export_viewer_bundle, load_viewer_bundle, CameraEntry, RunnerEntry, Strip, ViewerBundle,
    ViewerWaypoint,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("dataset has {} violations, first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: u64, message: impl ToString) -> Self {
        IoError::Parse {
            path: path.to_owned(),
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn schema(path: &Path, message: impl ToString) -> Self {
        IoError::Schema {
            path: path.to_owned(),
            message: message.to_string(),
        }
    }
}

/// Pretty JSON with object keys sorted.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // serde_json's default map is ordered, so going through `Value` sorts keys
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Single-line canonical JSON.
pub fn to_canonical_line<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&serde_json::to_value(value)?)
}

/// Writes `contents` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let s = to_canonical_json(value).map_err(|e| IoError::schema(path, e))?;
    write_atomic(path, s.as_bytes())
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let s = read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| IoError::parse(path, e.line() as u64, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            b: u8,
            a: f64,
        }
        let s = to_canonical_line(&S { b: 1, a: 0.1 }).unwrap();
        assert_eq!(s, r#"{"a":0.1,"b":1}"#);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
