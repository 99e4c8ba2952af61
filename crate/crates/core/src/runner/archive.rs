use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Condition, TrialRecord};

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const ELICITATIONS_FILE: &str = "elicitations.jsonl";
pub const ERRORS_FILE: &str = "errors.jsonl";
pub const COMPLETENESS_FILE: &str = "completeness.json";

/// Output of one best-practice elicitation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationRecord {
    pub model_id: String,
    pub strategy_id: String,
    pub pair_id: String,
    pub run_index: u32,
    /// The dilemma variant the practices were elicited from.
    pub source_condition: Condition,
    pub raw_text: String,
    pub cues: Option<String>,
    pub error: Option<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub timestamp: String,
}

/// A trial that could not be produced; not part of the trial archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialError {
    pub model_id: String,
    pub strategy_id: String,
    pub pair_id: String,
    pub run_index: u32,
    pub stage: String,
    pub kind: String,
    pub message: String,
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Schema {
            record: format!("{}:{}", path.display(), i + 1),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    read_jsonl(path)
}

/// Reads `trials.jsonl` from an archive directory.
pub fn read_archive(dir: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    read_trials(dir.as_ref().join(TRIALS_FILE))
}

pub fn read_elicitations(dir: impl AsRef<Path>) -> Result<Vec<ElicitationRecord>> {
    let path = dir.as_ref().join(ELICITATIONS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_jsonl(path)
}

/// Append-only newline-delimited JSON writer.
pub struct JsonlAppender {
    path: PathBuf,
    file: File,
}

impl JsonlAppender {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(JsonlAppender { path, file })
    }

    pub fn append<T: Serialize>(&mut self, rec: &T) -> Result<()> {
        let mut line = serde_json::to_string(rec)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}
