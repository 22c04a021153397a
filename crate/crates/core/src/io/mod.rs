//! Dataset files, run configuration, feature-matrix export and report
//! envelopes.

mod config;
mod dataset;
mod export;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::case_model::CaseError;

pub use config::{RunConfig, WORKERS_ENV};
pub use dataset::{
    filter_degenerate, load_and_filter, parse_dataset, read_dataset, write_dataset,
    write_dataset_to, ExcludedCase, LoadedCorpus, SCHEMA_VERSION,
};
pub use export::{export_feature_matrix, matrix_header, write_feature_matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported dataset schema version {0} (expected {SCHEMA_VERSION})", SCHEMA_VERSION = dataset::SCHEMA_VERSION)]
    SchemaVersionUnsupported(u32),
    #[error("line {line}: duplicate case id `{case_id}`")]
    DuplicateCaseId { line: usize, case_id: String },
    #[error("line {line}: case `{case_id}`: {source}")]
    InvalidCase {
        line: usize,
        case_id: String,
        #[source]
        source: CaseError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("write failed: {0}")]
    Write(String),
}

impl IoError {
    /// The case the error refers to, when there is one.
    pub fn case_id(&self) -> Option<&str> {
        match self {
            IoError::DuplicateCaseId { case_id, .. } | IoError::InvalidCase { case_id, .. } => {
                Some(case_id)
            }
            _ => None,
        }
    }
}

/// A report wrapped with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub kind: &'a str,
    pub tool_version: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub body: &'a T,
}

impl<'a, T: Serialize> Artifact<'a, T> {
    pub fn new(kind: &'a str, config: &RunConfig, body: &'a T) -> Self {
        Artifact {
            kind,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: config.hash(),
            seed: config.seed,
            body,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| IoError::Write(format!("{}: {e}", path.display())))
    }
}
