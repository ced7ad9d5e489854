//! Append-only JSON-lines checkpoint for resumable pipeline runs.
//!
//! The first line holds the input checksum; each later line is one tagged
//! record. A torn final line from an interrupted write is dropped on open.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, StageTag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub ut: String,
    pub stage: StageTag,
    /// Raw reply for records the classifier could not label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
}

impl CheckpointEntry {
    pub fn new(ut: &str, stage: StageTag) -> Self {
        CheckpointEntry {
            ut: ut.to_string(),
            stage,
            response: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    checksum: String,
}

pub struct Checkpoint {
    path: PathBuf,
    entries: Vec<CheckpointEntry>,
    file: File,
}

impl Checkpoint {
    pub fn open(path: &Path, checksum: &str) -> Result<Self, PipelineError> {
        let err = |message: String| PipelineError::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        let mut entries = Vec::new();
        let existing = match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(err(e.to_string())),
        };
        let complete = match existing.rfind('\n') {
            Some(i) => &existing[..=i],
            None => "",
        };
        if complete.is_empty() {
            let mut file = File::create(path).map_err(|e| err(e.to_string()))?;
            let header = serde_json::to_string(&Header {
                checksum: checksum.to_string(),
            })
            .expect("header serializes");
            writeln!(file, "{header}").map_err(|e| err(e.to_string()))?;
            file.sync_data().map_err(|e| err(e.to_string()))?;
        } else {
            let mut lines = complete.lines();
            let header: Header = serde_json::from_str(lines.next().unwrap_or(""))
                .map_err(|e| err(format!("bad header: {e}")))?;
            if header.checksum != checksum {
                return Err(PipelineError::ChecksumMismatch {
                    path: path.to_path_buf(),
                    expected: checksum.to_string(),
                    found: header.checksum,
                });
            }
            for (i, line) in lines.enumerate() {
                entries.push(
                    serde_json::from_str(line)
                        .map_err(|e| err(format!("line {}: {e}", i + 2)))?,
                );
            }
            if complete.len() != existing.len() {
                std::fs::write(path, complete).map_err(|e| err(e.to_string()))?;
            }
        }
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| err(e.to_string()))?;
        Ok(Checkpoint {
            path: path.to_path_buf(),
            entries,
            file,
        })
    }

    pub fn entries(&self) -> &[CheckpointEntry] {
        &self.entries
    }

    pub fn append(&mut self, entries: &[CheckpointEntry]) -> Result<(), PipelineError> {
        if entries.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for e in entries {
            buf.push_str(&serde_json::to_string(e).expect("entry serializes"));
            buf.push('\n');
        }
        self.file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| PipelineError::Checkpoint {
                path: self.path.clone(),
                message: e.to_string(),
            })?;
        self.entries.extend_from_slice(entries);
        Ok(())
    }
}
