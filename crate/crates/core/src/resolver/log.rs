//! Append-only JSON-lines record of every completion.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::client::{Provenance, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Unix time in milliseconds.
    pub timestamp: u64,
    pub kind: Purpose,
    pub ball: Option<String>,
    pub paddle: Option<String>,
    /// Free-form request for codegen and elaboration records.
    pub input: Option<String>,
    pub output: String,
    pub provenance: Provenance,
    pub temperature: f64,
    pub raw_completion: String,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log records serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("completion log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("completion log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

enum Sink {
    Memory(Vec<String>),
    File { path: PathBuf, file: File },
}

/// Thread-safe append-only log, in memory or backed by a file.
pub struct CompletionLog {
    sink: Mutex<Sink>,
}

impl std::fmt::Debug for CompletionLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &*self.sink.lock().unwrap_or_else(|e| e.into_inner()) {
            Sink::Memory(lines) => write!(f, "CompletionLog(memory, {} lines)", lines.len()),
            Sink::File { path, .. } => write!(f, "CompletionLog({})", path.display()),
        }
    }
}

impl CompletionLog {
    pub fn in_memory() -> Self {
        Self {
            sink: Mutex::new(Sink::Memory(Vec::new())),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            sink: Mutex::new(Sink::File { path, file }),
        })
    }

    pub fn append(&self, record: &LogRecord) -> Result<(), LogError> {
        let line = record.to_line();
        match &mut *self.sink.lock().unwrap_or_else(|e| e.into_inner()) {
            Sink::Memory(lines) => lines.push(line),
            Sink::File { file, .. } => {
                file.write_all(line.as_bytes())?;
                file.flush()?;
            }
        }
        Ok(())
    }

    /// Every record written so far, in order.
    pub fn records(&self) -> Result<Vec<LogRecord>, LogError> {
        match &*self.sink.lock().unwrap_or_else(|e| e.into_inner()) {
            Sink::Memory(lines) => lines
                .iter()
                .enumerate()
                .map(|(i, l)| serde_json::from_str(l).map_err(|source| LogError::Parse { line: i + 1, source }))
                .collect(),
            Sink::File { path, .. } => replay(path),
        }
    }

    pub fn len(&self) -> usize {
        self.records().map(|r| r.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> Option<PathBuf> {
        match &*self.sink.lock().unwrap_or_else(|e| e.into_inner()) {
            Sink::Memory(_) => None,
            Sink::File { path, .. } => Some(path.clone()),
        }
    }
}

/// Read a log file back. Re-serializing the result with
/// [`LogRecord::to_line`] reproduces the file byte for byte.
pub fn replay(path: impl AsRef<Path>) -> Result<Vec<LogRecord>, LogError> {
    let file = match File::open(path.as_ref()) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64) -> LogRecord {
        LogRecord {
            timestamp: 1_700_000_000_000 + i,
            kind: Purpose::Collision,
            ball: Some("salmon".into()),
            paddle: Some("knife".into()),
            input: None,
            output: "sushi".into(),
            provenance: Provenance::Mock,
            temperature: 0.5,
            raw_completion: " sushi.\n".into(),
        }
    }

    #[test]
    fn replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs/completions.jsonl");
        {
            let log = CompletionLog::open(&path).unwrap();
            for i in 0..5 {
                log.append(&rec(i)).unwrap();
            }
        }
        // reopening appends rather than truncating
        CompletionLog::open(&path).unwrap().append(&rec(9)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let rebuilt: String = replay(&path).unwrap().iter().map(LogRecord::to_line).collect();
        assert_eq!(rebuilt.as_bytes(), &bytes[..]);
        assert_eq!(replay(&path).unwrap().len(), 6);
    }
}
