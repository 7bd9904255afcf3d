use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmExchange};

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub model: String,
    pub prompt: String,
    pub response: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl FixtureRecord {
    pub fn from_exchange(model: &str, ex: &LlmExchange) -> Self {
        FixtureRecord {
            digest: ex.prompt_digest.clone(),
            model: model.to_string(),
            prompt: ex.prompt.clone(),
            response: ex.response.clone(),
            input_tokens: ex.input_tokens,
            output_tokens: ex.output_tokens,
        }
    }
}

/// Read-only replay index: digest → records in file order.
#[derive(Debug, Default)]
pub struct FixtureStore {
    by_digest: HashMap<String, Vec<FixtureRecord>>,
    prompts: Vec<String>,
}

impl FixtureStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let err = |message: String| LlmError::Fixture { path: path.display().to_string(), message };
        let file = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureRecord = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn from_records(records: Vec<FixtureRecord>) -> Self {
        let mut store = FixtureStore::default();
        for rec in records {
            store.prompts.push(rec.prompt.clone());
            store.by_digest.entry(rec.digest.clone()).or_default().push(rec);
        }
        store
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn lookup(&self, digest: &str) -> Option<&[FixtureRecord]> {
        self.by_digest.get(digest).map(Vec::as_slice)
    }

    /// Stored prompt sharing the longest common prefix with `prompt`.
    pub fn nearest_prompt(&self, prompt: &str) -> Option<&str> {
        let shared = |p: &str| p.bytes().zip(prompt.bytes()).take_while(|(a, b)| a == b).count();
        let mut best: Option<(&str, usize)> = None;
        for p in &self.prompts {
            let n = shared(p);
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((p, n));
            }
        }
        best.map(|(p, _)| p)
    }
}

/// Append-only fixture writer; appends are serialized.
pub struct FixtureWriter {
    path: PathBuf,
    file: Mutex<File>,
}

impl FixtureWriter {
    /// Truncates or creates `path`.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        Self::open_with(path.as_ref(), false)
    }

    /// Appends to `path`, creating it if needed.
    pub fn append_to(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        Self::open_with(path.as_ref(), true)
    }

    fn open_with(path: &Path, append: bool) -> Result<Self, LlmError> {
        let mut opts = OpenOptions::new();
        opts.create(true);
        if append {
            opts.append(true);
        } else {
            opts.write(true).truncate(true);
        }
        let file = opts
            .open(path)
            .map_err(|e| LlmError::Fixture { path: path.display().to_string(), message: e.to_string() })?;
        Ok(FixtureWriter { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn append(&self, rec: &FixtureRecord) -> Result<(), LlmError> {
        let mut line = serde_json::to_string(rec).expect("fixture record serializes");
        line.push('\n');
        let mut f = self.file.lock().expect("fixture writer lock");
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| LlmError::Fixture { path: self.path.display().to_string(), message: e.to_string() })
    }
}
