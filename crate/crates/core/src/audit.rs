//! Append-only audit log and its newline-delimited file format.
//!
//! Each line of a `<task_id>.events` file is one JSON object with the fields
//! `seq`, `wall_time`, `actor`, `kind` and `payload`.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::task::{Actor, EventKind};

pub const PAYLOAD_SCHEMA: u32 = 1;

/// Structured event detail. Fields this version does not know about are
/// kept as-is so that older binaries round-trip newer logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(flatten)]
    pub fields: Map<String, Value>,
}

fn default_schema() -> u32 {
    PAYLOAD_SCHEMA
}

impl Default for Payload {
    fn default() -> Self {
        Self::new()
    }
}

impl Payload {
    pub fn new() -> Self {
        Payload {
            schema: PAYLOAD_SCHEMA,
            fields: Map::new(),
        }
    }

    /// Build from a JSON object; non-object values land under `value`.
    pub fn from_json(value: Value) -> Self {
        match value {
            Value::Object(mut fields) => {
                let schema = fields
                    .remove("schema")
                    .and_then(|v| v.as_u64())
                    .map(|v| v as u32)
                    .unwrap_or(PAYLOAD_SCHEMA);
                Payload { schema, fields }
            }
            Value::Null => Payload::new(),
            other => Payload::new().with("value", other),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("payload value serializes");
        self.fields.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.get(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(Value::as_str)
    }

    /// Deserialize one field.
    pub fn field<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        self.get(key).and_then(|v| serde_json::from_value(v.clone()).ok())
    }

    /// Deserialize the whole field map as `T`.
    pub fn decode<T: DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        serde_json::from_value(Value::Object(self.fields.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    /// Milliseconds from the host clock (real or virtual).
    pub wall_time: i64,
    pub actor: Actor,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: Payload,
}

impl AuditEvent {
    pub fn new(seq: u64, wall_time: i64, actor: Actor, kind: EventKind, payload: Payload) -> Self {
        AuditEvent {
            seq,
            wall_time,
            actor,
            kind,
            payload,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("line {line}: {source}")]
    Corrupt {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// In-memory, append-only sequence of events with gapless `seq` from 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    events: Vec<AuditEvent>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<AuditEvent>) -> Result<Self, LogError> {
        let mut log = AuditLog::new();
        for e in events {
            log.append(e)?;
        }
        Ok(log)
    }

    pub fn append(&mut self, event: AuditEvent) -> Result<(), LogError> {
        let expected = self.events.len() as u64;
        if event.seq != expected {
            return Err(LogError::SequenceGap {
                expected,
                got: event.seq,
            });
        }
        self.events.push(event);
        Ok(())
    }

    /// Value-style append: the original log is left untouched.
    pub fn appended(&self, event: AuditEvent) -> Result<AuditLog, LogError> {
        let mut next = self.clone();
        next.append(event)?;
        Ok(next)
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn last(&self) -> Option<&AuditEvent> {
        self.events.last()
    }

    pub fn after(&self, after_seq: Option<u64>, limit: usize) -> &[AuditEvent] {
        let start = after_seq.map(|s| s as usize + 1).unwrap_or(0).min(self.events.len());
        let end = start.saturating_add(limit).min(self.events.len());
        &self.events[start..end]
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut log = AuditLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = AuditEvent::from_line(line).map_err(|source| LogError::Corrupt { line: i + 1, source })?;
            log.append(e)?;
        }
        Ok(log)
    }
}

/// File-backed log. Every append is flushed and synced before returning.
#[derive(Debug)]
pub struct EventFile {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl EventFile {
    pub fn path_for(dir: &Path, task_id: &str) -> PathBuf {
        dir.join(format!("{task_id}.events"))
    }

    /// Open or create the file and load its events. A trailing line without a
    /// newline (torn write) is discarded and truncated away.
    pub fn open(path: impl Into<PathBuf>) -> Result<(EventFile, AuditLog), LogError> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut log = AuditLog::new();
        let mut good_len = 0u64;
        {
            let mut reader = BufReader::new(&file);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 || !line.ends_with('\n') {
                    break;
                }
                lineno += 1;
                let event = AuditEvent::from_line(line.trim_end())
                    .map_err(|source| LogError::Corrupt { line: lineno, source })?;
                log.append(event)?;
                good_len += n as u64;
            }
        }
        if file.metadata()?.len() != good_len {
            file.set_len(good_len)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;
        let next_seq = log.next_seq();
        Ok((EventFile { path, file, next_seq }, log))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &AuditEvent) -> Result<(), LogError> {
        if event.seq != self.next_seq {
            return Err(LogError::SequenceGap {
                expected: self.next_seq,
                got: event.seq,
            });
        }
        let mut line = event.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.next_seq += 1;
        Ok(())
    }
}
