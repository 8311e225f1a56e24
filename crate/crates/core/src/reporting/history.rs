//! Append-only evaluation history, one JSON object per line.
//!
//! The first line of a history file is a [`HistoryHeader`]; every following
//! line is a [`HistoryRecord`]. Records are written and flushed one at a
//! time so an interrupted session keeps everything before the in-flight
//! evaluation.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::SearcherKind;
use crate::evaluation::{Measurement, ReferenceResult};
use crate::search::AnnealingSchedule;

pub const HISTORY_FORMAT: &str = "grouptune-history/1";

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("record iteration {found} out of order (expected {expected})")]
    OutOfOrder { expected: usize, found: usize },
    #[error("history i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("history {path} is empty")]
    Empty { path: PathBuf },
    #[error("corrupt history {path} at line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Seeding the candidate list from -O3.
    Init,
    /// Temperature-scheduled main loop.
    Anneal,
    /// Independent random sampling (RIO).
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub algorithm: SearcherKind,
    /// 1-based index of the mutated group, when the mutation was group-local.
    pub mutated_group: Option<usize>,
    /// Flag states in group order.
    pub combination: String,
    pub measurement: Measurement,
    /// Whether the candidate list (or RIO's running best) changed.
    pub accepted: bool,
    pub temperature: Option<f64>,
    /// Milliseconds since the Unix epoch; only stamped for real-compiler
    /// sessions so synthetic histories stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryHeader {
    pub format: String,
    pub grouping_digest: String,
    pub compiler_id: String,
    pub flags: usize,
    pub algorithm: SearcherKind,
    pub seed: u64,
    pub budget: usize,
    pub n_init: usize,
    pub schedule: AnnealingSchedule,
    pub evaluator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape_digest: Option<String>,
    pub reference: ReferenceResult,
    /// Effective session configuration, echoed for provenance.
    #[serde(default)]
    pub config: serde_json::Value,
}

/// Destination for evaluation records.
pub trait HistorySink {
    /// Appends `rec`; its iteration must follow the previous record's.
    fn append(&mut self, rec: HistoryRecord) -> Result<(), HistoryError>;
}

impl<S: HistorySink + ?Sized> HistorySink for &mut S {
    fn append(&mut self, rec: HistoryRecord) -> Result<(), HistoryError> {
        (**self).append(rec)
    }
}

fn check_order(next: usize, rec: &HistoryRecord) -> Result<(), HistoryError> {
    if rec.iteration != next {
        return Err(HistoryError::OutOfOrder {
            expected: next,
            found: rec.iteration,
        });
    }
    Ok(())
}

/// In-memory history.
#[derive(Debug, Clone, Default)]
pub struct MemoryHistory {
    pub records: Vec<HistoryRecord>,
}

impl MemoryHistory {
    pub fn new() -> Self {
        Self::default()
    }
}

impl HistorySink for MemoryHistory {
    fn append(&mut self, rec: HistoryRecord) -> Result<(), HistoryError> {
        check_order(self.records.len(), &rec)?;
        self.records.push(rec);
        Ok(())
    }
}

/// `history.jsonl` writer.
#[derive(Debug)]
pub struct JsonlHistory {
    path: PathBuf,
    file: File,
    next: usize,
    stamp: bool,
}

impl JsonlHistory {
    /// Creates (truncating) `path` and writes the header line.
    pub fn create(path: &Path, header: &HistoryHeader) -> Result<Self, HistoryError> {
        let io_err = |source| HistoryError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)
            .map_err(io_err)?;
        let mut history = Self {
            path: path.to_path_buf(),
            file,
            next: 0,
            stamp: false,
        };
        let line = serde_json::to_string(header).expect("header serializes");
        history.write_line(&line)?;
        Ok(history)
    }

    /// Stamp each record with wall-clock time on append.
    pub fn with_timestamps(mut self, stamp: bool) -> Self {
        self.stamp = stamp;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.next
    }

    pub fn is_empty(&self) -> bool {
        self.next == 0
    }

    fn write_line(&mut self, line: &str) -> Result<(), HistoryError> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        self.file
            .write_all(&buf)
            .and_then(|_| self.file.flush())
            .map_err(|source| HistoryError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

impl HistorySink for JsonlHistory {
    fn append(&mut self, mut rec: HistoryRecord) -> Result<(), HistoryError> {
        check_order(self.next, &rec)?;
        if self.stamp {
            rec.timestamp_ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .ok()
                .map(|d| d.as_millis() as u64);
        }
        let line = serde_json::to_string(&rec).expect("record serializes");
        self.write_line(&line)?;
        self.next += 1;
        Ok(())
    }
}

/// A history file read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedHistory {
    pub header: HistoryHeader,
    pub records: Vec<HistoryRecord>,
    /// Set when a truncated final line was dropped.
    pub truncated_tail: bool,
}

/// Reads a history file. A malformed *last* line (an interrupted write) is
/// dropped and reported through `truncated_tail`; malformed lines anywhere
/// else are errors.
pub fn read_history(path: &Path) -> Result<LoadedHistory, HistoryError> {
    let io_err = |source| HistoryError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>().map_err(io_err)?;
    let lines: Vec<(usize, &String)> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let Some(((header_line, header_text), rest)) = lines.split_first() else {
        return Err(HistoryError::Empty {
            path: path.to_path_buf(),
        });
    };
    let corrupt = |line: usize, message: String| HistoryError::Corrupt {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header: HistoryHeader =
        serde_json::from_str(header_text).map_err(|e| corrupt(*header_line, e.to_string()))?;

    let mut records = Vec::with_capacity(rest.len());
    let mut truncated_tail = false;
    for (k, (line_no, text)) in rest.iter().enumerate() {
        match serde_json::from_str::<HistoryRecord>(text) {
            Ok(rec) => {
                if rec.iteration != records.len() {
                    return Err(corrupt(
                        *line_no,
                        format!("iteration {} out of order", rec.iteration),
                    ));
                }
                records.push(rec);
            }
            Err(_) if k + 1 == rest.len() => truncated_tail = true,
            Err(e) => return Err(corrupt(*line_no, e.to_string())),
        }
    }
    Ok(LoadedHistory {
        header,
        records,
        truncated_tail,
    })
}
