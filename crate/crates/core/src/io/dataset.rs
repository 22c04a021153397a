use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::case_model::{validate_case, DecisionCase, RawCase};

/// Version written into, and required from, dataset headers.
pub const SCHEMA_VERSION: u32 = 1;

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
}

/// Parses a dataset: a header line declaring the schema version, then one
/// JSON case per line. Blank lines are ignored; line numbers are 1-based.
pub fn parse_dataset(reader: impl Read) -> Result<Vec<DecisionCase>, IoError> {
    let mut cases = Vec::new();
    let mut seen = HashSet::new();
    let mut header_seen = false;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| IoError::Read {
            path: String::new(),
            message: e.to_string(),
        })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if !header_seen {
            let header: Header = serde_json::from_str(text).map_err(|e| IoError::Parse {
                line: line_no,
                message: format!("expected a header with schema_version: {e}"),
            })?;
            if header.schema_version != SCHEMA_VERSION {
                return Err(IoError::SchemaVersionUnsupported(header.schema_version));
            }
            header_seen = true;
            continue;
        }
        let raw: RawCase = serde_json::from_str(text).map_err(|e| IoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(raw.case_id.clone()) {
            return Err(IoError::DuplicateCaseId {
                line: line_no,
                case_id: raw.case_id,
            });
        }
        let case = validate_case(&raw).map_err(|source| IoError::InvalidCase {
            line: line_no,
            case_id: raw.case_id.clone(),
            source,
        })?;
        cases.push(case);
    }
    if !header_seen {
        return Err(IoError::Parse {
            line: 1,
            message: "missing schema_version header".into(),
        });
    }
    Ok(cases)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DecisionCase>, IoError> {
    let file = File::open(path).map_err(|e| IoError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(file)
}

pub fn write_dataset_to(mut w: impl Write, cases: &[DecisionCase]) -> Result<(), IoError> {
    let werr = |e: std::io::Error| IoError::Write(e.to_string());
    let header = serde_json::to_string(&Header {
        schema_version: SCHEMA_VERSION,
    })
    .map_err(|e| IoError::Write(e.to_string()))?;
    writeln!(w, "{header}").map_err(werr)?;
    for case in cases {
        let line =
            serde_json::to_string(&case.to_raw()).map_err(|e| IoError::Write(e.to_string()))?;
        writeln!(w, "{line}").map_err(werr)?;
    }
    w.flush().map_err(werr)
}

pub fn write_dataset(path: &Path, cases: &[DecisionCase]) -> Result<(), IoError> {
    let file =
        File::create(path).map_err(|e| IoError::Write(format!("{}: {e}", path.display())))?;
    write_dataset_to(BufWriter::new(file), cases)
}

/// A case dropped by the degenerate-case filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedCase {
    pub case_id: String,
    /// Fraction of responses voting for the correct answer (0 or 1).
    pub correct_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub cases: Vec<DecisionCase>,
    pub excluded: Vec<ExcludedCase>,
}

/// Drops cases that everyone or no one answered correctly when
/// `exclude_degenerate` is set. Cases without a known answer are kept.
pub fn filter_degenerate(cases: Vec<DecisionCase>, exclude_degenerate: bool) -> LoadedCorpus {
    if !exclude_degenerate {
        return LoadedCorpus {
            cases,
            excluded: Vec::new(),
        };
    }
    let mut kept = Vec::with_capacity(cases.len());
    let mut excluded = Vec::new();
    for case in cases {
        match case.correct_share() {
            Some(share) if share == 0.0 || share == 1.0 => excluded.push(ExcludedCase {
                case_id: case.case_id.clone(),
                correct_share: share,
            }),
            _ => kept.push(case),
        }
    }
    LoadedCorpus {
        cases: kept,
        excluded,
    }
}

pub fn load_and_filter(path: &Path, exclude_degenerate: bool) -> Result<LoadedCorpus, IoError> {
    Ok(filter_degenerate(read_dataset(path)?, exclude_degenerate))
}
