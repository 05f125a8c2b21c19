//! Append-only case log with memory snapshots.
//!
//! Files in the data directory:
//! - `base.json`: memory document the log is replayed against; written once.
//! - `cases.ndjson`: one [`LogEvent`] per line, never rewritten.
//! - `snapshot.json`: memory after the first `events` log lines.
//!
//! Lock order is writer, then cases, then memory. Diagnoses read the memory
//! and release it before taking the writer, so a request sees one version.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use bronchial_dx::cdamm::{Memory, MemoryDocument};
use bronchial_dx::encoder::PatientInput;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, Outcome};
use crate::error::{ServiceError, ServiceResult};
use crate::payload::{DiagnoseRequest, FeedbackRequest};

pub const BASE_FILE: &str = "base.json";
pub const LOG_FILE: &str = "cases.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub submitted_ms: u64,
    pub input: PatientInput,
    pub diagnosis: Outcome,
    /// Memory version the diagnosis was computed against.
    pub memory_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Case(Box<CaseRecord>),
    Feedback {
        id: String,
        feedback: Feedback,
        /// Signs learned under `feedback.label`; empty without a label.
        signs: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Number of log lines folded into `memory`.
    pub events: u64,
    pub memory: MemoryDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub case_id: String,
    pub learned: bool,
    pub memory_version: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Applies one event to the memory and case table.
fn apply(event: &LogEvent, memory: &mut Memory, cases: &mut HashMap<String, CaseRecord>) -> ServiceResult<()> {
    match event {
        LogEvent::Case(c) => {
            cases.insert(c.id.clone(), (**c).clone());
        }
        LogEvent::Feedback { id, feedback, signs } => {
            if let Some(label) = &feedback.label {
                memory.learn_case(label, signs)?;
            }
            if let Some(c) = cases.get_mut(id) {
                c.feedback = Some(feedback.clone());
            }
        }
    }
    Ok(())
}

/// Reads every complete line of the log. A torn final line (no trailing
/// newline) is dropped; a malformed complete line is an error.
pub fn read_log(path: &Path) -> ServiceResult<Vec<LogEvent>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut line = String::new();
    let mut n = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        n += 1;
        if !line.ends_with('\n') {
            tracing::warn!(line = n, "ignoring torn final log line");
            break;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Internal(format!("{} line {n}: {e}", path.display())))?;
        out.push(event);
    }
    Ok(out)
}

/// Folds the whole log into `base`.
pub fn replay(base: Memory, events: &[LogEvent]) -> ServiceResult<(Memory, HashMap<String, CaseRecord>)> {
    let mut memory = base;
    let mut cases = HashMap::new();
    for e in events {
        apply(e, &mut memory, &mut cases)?;
    }
    Ok((memory, cases))
}

fn write_atomic(path: &Path, contents: &str) -> ServiceResult<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Writer {
    file: File,
    events: u64,
    since_snapshot: u64,
}

pub struct CaseStore {
    dir: PathBuf,
    base: Memory,
    memory: RwLock<Memory>,
    cases: RwLock<HashMap<String, CaseRecord>>,
    writer: Mutex<Writer>,
    /// Write a snapshot after this many events; 0 disables snapshots.
    snapshot_every: u64,
}

fn poisoned<T>(_: T) -> ServiceError {
    ServiceError::Internal("a previous request panicked while holding a lock".into())
}

impl CaseStore {
    /// Opens or creates the store in `dir`. `base` is used only when the
    /// directory has no `base.json` yet.
    pub fn open(
        dir: impl Into<PathBuf>,
        base: impl FnOnce() -> ServiceResult<Memory>,
        snapshot_every: u64,
    ) -> ServiceResult<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let base_path = dir.join(BASE_FILE);
        let base = if base_path.exists() {
            crate::engine::memory_from_file(&base_path)?
        } else {
            let m = base()?;
            write_atomic(&base_path, &m.to_json())?;
            m
        };
        let events = read_log(&dir.join(LOG_FILE))?;
        let snapshot: Option<Snapshot> = match std::fs::read_to_string(dir.join(SNAPSHOT_FILE)) {
            Ok(text) => {
                Some(serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("snapshot: {e}")))?)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let (start, mut memory) = match snapshot {
            Some(s) if s.events <= events.len() as u64 => (s.events as usize, Memory::from_document(&s.memory)?),
            Some(_) => {
                tracing::warn!("snapshot is ahead of the log; replaying from base");
                (0, base.clone())
            }
            None => (0, base.clone()),
        };
        let mut cases = HashMap::new();
        let mut scratch = base.clone();
        for (i, e) in events.iter().enumerate() {
            // Events before the snapshot only rebuild the case table.
            let target = if i < start { &mut scratch } else { &mut memory };
            apply(e, target, &mut cases)?;
        }
        let log_path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&log_path)?;
        let len = file.metadata()?.len();
        let valid = Self::complete_prefix_len(&log_path)?;
        if valid < len {
            // Drop the torn tail so the next append starts on a fresh line.
            file.set_len(valid)?;
        }
        file.flush()?;
        Ok(Self {
            dir,
            base,
            memory: RwLock::new(memory),
            cases: RwLock::new(cases),
            writer: Mutex::new(Writer { file, events: events.len() as u64, since_snapshot: 0 }),
            snapshot_every,
        })
    }

    fn complete_prefix_len(path: &Path) -> ServiceResult<u64> {
        let bytes = std::fs::read(path)?;
        Ok(bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i as u64 + 1))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn base(&self) -> &Memory {
        &self.base
    }

    pub fn memory_version(&self) -> u64 {
        self.memory.read().map(|m| m.version()).unwrap_or(0)
    }

    pub fn memory_document(&self) -> ServiceResult<MemoryDocument> {
        Ok(self.memory.read().map_err(poisoned)?.to_document())
    }

    /// A copy of the live memory.
    pub fn memory(&self) -> ServiceResult<Memory> {
        Ok(self.memory.read().map_err(poisoned)?.clone())
    }

    pub fn diseases(&self) -> ServiceResult<Vec<String>> {
        Ok(self.memory.read().map_err(poisoned)?.diseases().ids().to_vec())
    }

    pub fn case_count(&self) -> usize {
        self.cases.read().map(|c| c.len()).unwrap_or(0)
    }

    pub fn case(&self, id: &str) -> ServiceResult<CaseRecord> {
        self.cases
            .read()
            .map_err(poisoned)?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no case with id `{id}`")))
    }

    fn append(&self, w: &mut Writer, event: &LogEvent) -> ServiceResult<()> {
        let mut line = serde_json::to_string(event).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push('\n');
        w.file.write_all(line.as_bytes())?;
        w.file.flush()?;
        w.events += 1;
        w.since_snapshot += 1;
        Ok(())
    }

    fn maybe_snapshot(&self, w: &mut Writer) -> ServiceResult<()> {
        if self.snapshot_every > 0 && w.since_snapshot >= self.snapshot_every {
            self.write_snapshot(w)?;
        }
        Ok(())
    }

    fn write_snapshot(&self, w: &mut Writer) -> ServiceResult<()> {
        let snap = Snapshot { events: w.events, memory: self.memory.read().map_err(poisoned)?.to_document() };
        let text = serde_json::to_string(&snap).map_err(|e| ServiceError::Internal(e.to_string()))?;
        write_atomic(&self.dir.join(SNAPSHOT_FILE), &text)?;
        w.since_snapshot = 0;
        Ok(())
    }

    /// Forces a snapshot now.
    pub fn snapshot(&self) -> ServiceResult<()> {
        let mut w = self.writer.lock().map_err(poisoned)?;
        self.write_snapshot(&mut w)
    }

    pub fn diagnose(&self, engine: &Engine, req: DiagnoseRequest) -> ServiceResult<CaseRecord> {
        let (diagnosis, memory_version) = {
            let mem = self.memory.read().map_err(poisoned)?;
            (engine.run(&mem, &req.input, req.algo)?, mem.version())
        };
        let record = CaseRecord {
            id: uuid::Uuid::new_v4().simple().to_string(),
            submitted_ms: now_ms(),
            input: req.input,
            diagnosis,
            memory_version,
            feedback: None,
        };
        let mut w = self.writer.lock().map_err(poisoned)?;
        self.append(&mut w, &LogEvent::Case(Box::new(record.clone())))?;
        self.cases.write().map_err(poisoned)?.insert(record.id.clone(), record.clone());
        self.maybe_snapshot(&mut w)?;
        Ok(record)
    }

    /// Records feedback once per case; a confirmed label is learned.
    pub fn feedback(&self, engine: &Engine, id: &str, req: FeedbackRequest) -> ServiceResult<FeedbackAck> {
        let mut w = self.writer.lock().map_err(poisoned)?;
        let signs = {
            let cases = self.cases.read().map_err(poisoned)?;
            let case = cases.get(id).ok_or_else(|| ServiceError::NotFound(format!("no case with id `{id}`")))?;
            if case.feedback.is_some() {
                return Err(ServiceError::Conflict(format!("case `{id}` already has feedback")));
            }
            if req.label.is_some() {
                engine.signs(&case.input)
            } else {
                Vec::new()
            }
        };
        let feedback = Feedback { label: req.label, rating: req.rating, at_ms: now_ms() };
        // Learn on a copy first so a rejected label leaves no trace in the log.
        let mut mem = self.memory.write().map_err(poisoned)?;
        let mut next = mem.clone();
        if let Some(label) = &feedback.label {
            next.learn_case(label, &signs)?;
        }
        let event = LogEvent::Feedback { id: id.to_string(), feedback: feedback.clone(), signs };
        self.append(&mut w, &event)?;
        *mem = next;
        let memory_version = mem.version();
        drop(mem);
        if let Some(c) = self.cases.write().map_err(poisoned)?.get_mut(id) {
            c.feedback = Some(feedback.clone());
        }
        self.maybe_snapshot(&mut w)?;
        Ok(FeedbackAck { case_id: id.to_string(), learned: feedback.label.is_some(), memory_version })
    }
}
