//! Corpus ingestion and the on-disk dataset format.
//!
//! A dataset file is newline-delimited: a schema-version header line followed
//! by one JSON record per trial. The format round-trips losslessly, including
//! missing markers.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::{extract_auxiliary, extract_features};
use super::parse::{parse_study, passes_inclusion};
use super::types::{AuxiliaryRow, FeatureRow, StudyRecord};
use crate::labeling::TrialAggregates;
use crate::par;

pub const DATASET_SCHEMA: &str = "ctdr.dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema version mismatch: expected {DATASET_SCHEMA} v{DATASET_VERSION}, found {found}")]
    SchemaVersionMismatch { found: String },
    #[error("malformed dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// One trial: the validated record, its feature vector, the auxiliary
/// pass-through columns, and (once labeled) the trial-level aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub record: StudyRecord,
    pub features: FeatureRow,
    pub aux: AuxiliaryRow,
    pub aggregates: Option<TrialAggregates>,
}

impl DatasetRow {
    pub fn nct_id(&self) -> &str {
        &self.record.nct_id
    }
}

/// An ingested corpus, ordered by nct id ascending. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    rows: Vec<DatasetRow>,
}

impl Dataset {
    /// Builds a dataset from rows, restoring the canonical nct-id order.
    pub fn from_rows(mut rows: Vec<DatasetRow>) -> Self {
        rows.sort_by(|a, b| a.record.nct_id.cmp(&b.record.nct_id));
        Dataset { rows }
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows carrying label aggregates, i.e. the supervised subset.
    pub fn labeled_rows(&self) -> impl Iterator<Item = &DatasetRow> {
        self.rows.iter().filter(|r| r.aggregates.is_some())
    }

    pub(crate) fn rows_mut(&mut self) -> &mut Vec<DatasetRow> {
        &mut self.rows
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedDocument {
    pub source: String,
    pub error: String,
}

/// Counts and rejection details from one ingest run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub parsed: usize,
    pub excluded: usize,
    pub rejected: Vec<RejectedDocument>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, IngestError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut in_dir: Vec<PathBuf> = walkdir::WalkDir::new(path)
                .sort_by_file_name()
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_file())
                .map(|e| e.into_path())
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("json") | Some("ndjson") | Some("jsonl")
                    )
                })
                .collect();
            in_dir.sort();
            files.extend(in_dir);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

/// Splits a file into per-document texts: either the whole file is one JSON
/// document, or it is newline-delimited with one document per line.
fn split_documents(content: &str) -> Vec<(usize, String)> {
    if serde_json::from_str::<serde_json::Value>(content).is_ok() {
        return vec![(1, content.to_string())];
    }
    content
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| (i + 1, line.to_string()))
        .collect()
}

/// Parses every document under `paths`, applies the inclusion filter, and
/// assembles the dataset in nct-id order. Individual malformed documents are
/// rejected without aborting the corpus.
pub fn ingest_corpus(
    paths: &[PathBuf],
    cutoff: NaiveDate,
) -> Result<(Dataset, IngestReport), IngestError> {
    let files = collect_files(paths)?;
    let mut documents: Vec<(String, String)> = Vec::new();
    for file in &files {
        let content = fs::read_to_string(file).map_err(|source| IngestError::Io {
            path: file.clone(),
            source,
        })?;
        for (line, text) in split_documents(&content) {
            documents.push((format!("{}:{line}", file.display()), text));
        }
    }

    let parsed: Vec<Result<StudyRecord, (String, String)>> =
        par::map_slice(&documents, |(source, text)| {
            parse_study(text).map_err(|e| (source.clone(), e.to_string()))
        });

    let mut report = IngestReport::default();
    let mut rows = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for result in parsed {
        match result {
            Ok(record) => {
                report.parsed += 1;
                if !passes_inclusion(&record, cutoff) {
                    report.excluded += 1;
                    continue;
                }
                if !seen.insert(record.nct_id.clone()) {
                    log::warn!("duplicate record {} ignored", record.nct_id);
                    continue;
                }
                let features = extract_features(&record);
                let aux = extract_auxiliary(&record);
                rows.push(DatasetRow {
                    record,
                    features,
                    aux,
                    aggregates: None,
                });
            }
            Err((source, error)) => {
                log::warn!("rejected document {source}: {error}");
                report.rejected.push(RejectedDocument { source, error });
            }
        }
    }

    log::info!(
        "ingest: parsed={} rejected={} excluded={} kept={}",
        report.parsed,
        report.rejected.len(),
        report.excluded,
        rows.len()
    );
    Ok((Dataset::from_rows(rows), report))
}

/// Writes a dataset as a versioned newline-delimited file.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    let header = serde_json::json!({"schema": DATASET_SCHEMA, "version": DATASET_VERSION});
    writeln!(out, "{header}")?;
    for row in dataset.rows() {
        let line = serde_json::to_string(row).map_err(|e| DatasetError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(out, "{line}")?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a dataset written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(DatasetError::SchemaVersionMismatch {
                found: "<empty file>".to_string(),
            })
        }
    };
    let header: serde_json::Value =
        serde_json::from_str(&header_line).map_err(|_| DatasetError::SchemaVersionMismatch {
            found: header_line.clone(),
        })?;
    let schema = header.get("schema").and_then(|v| v.as_str());
    let version = header.get("version").and_then(|v| v.as_u64());
    if schema != Some(DATASET_SCHEMA) || version != Some(u64::from(DATASET_VERSION)) {
        return Err(DatasetError::SchemaVersionMismatch { found: header_line });
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DatasetRow =
            serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
                line: i + 2,
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(Dataset::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::parse::tests::minimal_doc;

    fn doc_with_id(n: u32, submit: &str) -> serde_json::Value {
        let mut doc = minimal_doc();
        doc["protocolSection"]["identificationModule"]["nctId"] =
            format!("NCT{n:08}").into();
        doc["protocolSection"]["statusModule"]["studyFirstSubmitDate"] = submit.into();
        doc
    }

    fn cutoff() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 9, 1).unwrap()
    }

    #[test]
    fn ingest_filters_and_orders() {
        let dir = tempfile::tempdir().unwrap();
        // Three files; one fails inclusion via a post-cutoff submission.
        for (i, submit) in [(3u32, "2015-01-10"), (1, "2025-12-01"), (2, "2015-01-10")] {
            let path = dir.path().join(format!("doc{i}.json"));
            fs::write(&path, doc_with_id(i, submit).to_string()).unwrap();
        }
        let (dataset, report) =
            ingest_corpus(&[dir.path().to_path_buf()], cutoff()).unwrap();
        assert_eq!(dataset.len(), 2);
        assert_eq!(report.parsed, 3);
        assert_eq!(report.excluded, 1);
        assert!(report.rejected.is_empty());
        // nct-id ascending regardless of file order.
        assert_eq!(dataset.rows()[0].nct_id(), "NCT00000002");
        assert_eq!(dataset.rows()[1].nct_id(), "NCT00000003");
    }

    #[test]
    fn empty_corpus_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let (dataset, report) =
            ingest_corpus(&[dir.path().to_path_buf()], cutoff()).unwrap();
        assert!(dataset.is_empty());
        assert_eq!(report.parsed, 0);
    }

    #[test]
    fn malformed_document_rejected_in_isolation() {
        let dir = tempfile::tempdir().unwrap();
        let mut content = String::new();
        for i in 1..=5u32 {
            if i == 3 {
                content.push_str("{\"this is\": \"not a study\"}\n");
            } else {
                content.push_str(&doc_with_id(i, "2015-01-10").to_string());
                content.push('\n');
            }
        }
        let path = dir.path().join("bundle.ndjson");
        fs::write(&path, content).unwrap();
        let (dataset, report) = ingest_corpus(&[path], cutoff()).unwrap();
        assert_eq!(dataset.len(), 4);
        assert_eq!(report.rejected.len(), 1);
        assert!(report.rejected[0].source.ends_with(":3"));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut content = String::new();
        for i in 1..=10u32 {
            content.push_str(&doc_with_id(i, "2015-01-10").to_string());
            content.push('\n');
        }
        let corpus = dir.path().join("corpus.ndjson");
        fs::write(&corpus, content).unwrap();
        let (dataset, _) = ingest_corpus(&[corpus], cutoff()).unwrap();

        let file = dir.path().join("dataset.ndjson");
        save_dataset(&dataset, &file).unwrap();
        let loaded = load_dataset(&file).unwrap();
        assert_eq!(dataset, loaded);

        // Empty dataset round trip.
        let empty = Dataset::default();
        let file2 = dir.path().join("empty.ndjson");
        save_dataset(&empty, &file2).unwrap();
        assert_eq!(load_dataset(&file2).unwrap(), empty);
    }

    #[test]
    fn missing_header_is_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.ndjson");
        fs::write(&file, "{\"record\": {}}\n").unwrap();
        assert!(matches!(
            load_dataset(&file),
            Err(DatasetError::SchemaVersionMismatch { .. })
        ));
    }
}
