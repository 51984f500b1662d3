//! `records.jsonl`: one JSON object per line, append-only.

use crate::corpus::TranslationTask;
use crate::judge::VerdictKind;
use crate::model::CacheKey;
use crate::postprocess::{ExtractionPath, Rule};
use crate::prompt::PromptStrategy;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub template_id: String,
    /// SHA-256 of the exact prompt text sent.
    pub prompt_digest: String,
    /// Key of the response in the model cache.
    pub response_digest: CacheKey,
    /// Inline response text, only kept in live mode where no cache exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub code: String,
    pub extraction_path: ExtractionPath,
    pub rules_applied: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub kind: VerdictKind,
    pub detail_digest: String,
    pub failing_test: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub v: u32,
    pub run_id: String,
    pub task: TranslationTask,
    pub strategy: PromptStrategy,
    pub model_id: String,
    pub stages: Vec<StageRecord>,
    pub candidate: Option<CandidateRecord>,
    pub verdict: Option<VerdictRecord>,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub judge_wall_ms: u64,
    pub created_at: String,
}

/// Identity of one work unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub task: TranslationTask,
    pub strategy: PromptStrategy,
    pub model_id: String,
}

impl ExperimentRecord {
    pub fn triple(&self) -> Triple {
        Triple {
            task: self.task.clone(),
            strategy: self.strategy.clone(),
            model_id: self.model_id.clone(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status == RecordStatus::Complete
    }

    pub fn is_success(&self) -> bool {
        self.is_complete()
            && self
                .verdict
                .as_ref()
                .is_some_and(|v| v.kind == VerdictKind::Success)
    }

    /// Copy with timestamps and wall-clock times zeroed, for comparing runs.
    pub fn without_timing(&self) -> ExperimentRecord {
        let mut r = self.clone();
        r.created_at = String::new();
        r.judge_wall_ms = 0;
        for s in &mut r.stages {
            s.wall_ms = 0;
        }
        r
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordsError {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record at {path}:{line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Default)]
pub struct LoadedRecords {
    pub records: Vec<ExperimentRecord>,
    /// Byte length of the valid prefix of the file.
    pub valid_len: u64,
    /// The discarded final line, if it did not parse.
    pub truncated_tail: Option<String>,
}

/// Reads a records file. A final line that fails to parse is treated as
/// an interrupted write and dropped; any other bad line is an error.
/// A missing file reads as empty.
pub fn load_records(path: &Path) -> Result<LoadedRecords, RecordsError> {
    let text = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(LoadedRecords::default()),
        Err(source) => {
            return Err(RecordsError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut out = LoadedRecords::default();
    let mut offset = 0usize;
    let total = text.len();
    let mut line_no = 0;
    while offset < total {
        line_no += 1;
        let end = text[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(total, |i| offset + i);
        let raw = &text[offset..end];
        let next = (end + 1).min(total);
        let is_last = next >= total;
        if raw.iter().all(u8::is_ascii_whitespace) {
            offset = next;
            out.valid_len = offset as u64;
            continue;
        }
        let parsed = std::str::from_utf8(raw)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<ExperimentRecord>(s).map_err(|e| e.to_string()));
        match parsed {
            Ok(rec) => {
                out.records.push(rec);
                offset = next;
                // a final line without its newline still counts as written
                out.valid_len = offset as u64;
            }
            Err(_) if is_last => {
                out.truncated_tail = Some(String::from_utf8_lossy(raw).into_owned());
                break;
            }
            Err(reason) => {
                return Err(RecordsError::Corrupt {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason,
                })
            }
        }
    }
    Ok(out)
}

/// Keeps the last record per triple.
pub fn latest_per_triple(records: Vec<ExperimentRecord>) -> Vec<ExperimentRecord> {
    let mut map: BTreeMap<Triple, ExperimentRecord> = BTreeMap::new();
    for r in records {
        map.insert(r.triple(), r);
    }
    map.into_values().collect()
}

pub fn completed_triples(records: &[ExperimentRecord]) -> BTreeSet<Triple> {
    records
        .iter()
        .filter(|r| r.is_complete())
        .map(ExperimentRecord::triple)
        .collect()
}

/// Single-writer appender. Each record is written as one line and flushed.
pub struct RecordWriter {
    path: PathBuf,
    file: fs::File,
}

impl RecordWriter {
    /// Opens for append after cutting the file back to `valid_len`, which
    /// discards a partial final line left by an interrupted run.
    pub fn open(path: &Path, valid_len: u64) -> Result<Self, RecordsError> {
        let io = |source| RecordsError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(path)
            .map_err(io)?;
        let len = file.metadata().map_err(io)?.len();
        if len > valid_len {
            file.set_len(valid_len).map_err(io)?;
        }
        let mut writer = RecordWriter {
            path: path.to_path_buf(),
            file,
        };
        if valid_len > 0 {
            // make sure the last kept line is newline-terminated
            use std::io::{Read, Seek, SeekFrom};
            let mut last = [0u8; 1];
            writer.file.seek(SeekFrom::Start(valid_len - 1)).map_err(io)?;
            writer.file.read_exact(&mut last).map_err(io)?;
            writer.file.seek(SeekFrom::End(0)).map_err(io)?;
            if last[0] != b'\n' {
                writer.file.write_all(b"\n").map_err(io)?;
            }
        }
        use std::io::Seek;
        writer
            .file
            .seek(std::io::SeekFrom::End(0))
            .map_err(io)?;
        Ok(writer)
    }

    pub fn append(&mut self, record: &ExperimentRecord) -> Result<(), RecordsError> {
        let mut line = serde_json::to_vec(record).expect("records serialize");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|source| RecordsError::Io {
                path: self.path.clone(),
                source,
            })
    }
}
