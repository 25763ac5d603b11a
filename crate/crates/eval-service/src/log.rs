use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::state::Event;

/// Log line: `{"seq": n, "event": "<kind>", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Append-only JSONL event log. Each append is flushed and synced before
/// it returns.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl EventLog {
    /// Open or create the log and return the events already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Event>)> {
        let path = path.as_ref().to_path_buf();
        let io = |source| ServiceError::Io { path: path.clone(), source };
        let events = if path.exists() { read_events(&path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok((
            EventLog {
                path,
                file,
                next_seq: events.len() as u64,
            },
            events,
        ))
    }

    pub fn append(&mut self, event: &Event) -> Result<u64> {
        let seq = self.next_seq;
        let line = LogLine { seq, event: event.clone() };
        let mut raw = serde_json::to_string(&line).expect("events serialize");
        raw.push('\n');
        let io = |source| ServiceError::Io { path: self.path.clone(), source };
        self.file.write_all(raw.as_bytes()).map_err(io)?;
        self.file.flush().map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.next_seq += 1;
        Ok(seq)
    }

    pub fn len(&self) -> u64 {
        self.next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.next_seq == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let file = File::open(path).map_err(|source| ServiceError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ServiceError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| ServiceError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        if parsed.seq != out.len() as u64 {
            return Err(ServiceError::Corrupt {
                line: i + 1,
                message: format!("sequence {} out of order, expected {}", parsed.seq, out.len()),
            });
        }
        out.push(parsed.event);
    }
    Ok(out)
}
