//! Append-only session persistence.
//!
//! `session.jsonl` gets one JSON record per line: every iteration's
//! [`StepRecord`] and a closing summary. Each iteration also writes its
//! detection as plain text to `det_NNN.txt`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::ComponentCatalog;
use crate::detection::format_report_lines;

use super::{SessionResult, StepRecord, Termination};

pub const SESSION_FILE: &str = "session.jsonl";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("session log io at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("session in {0} already finished")]
    AlreadyFinished(PathBuf),
}

/// One line of the log, externally tagged: `{"step": {...}}` or `{"finish": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRecord {
    Step(Box<StepRecord>),
    Finish {
        success: bool,
        termination: Termination,
        detail: String,
        total_seconds: f64,
    },
}

#[derive(Debug)]
pub struct SessionLog {
    dir: PathBuf,
    file: File,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl SessionLog {
    /// Opens (or continues) the log in `dir`, creating the directory if needed.
    /// A torn last line left by a crash is cut off before appending.
    pub fn open(dir: &Path) -> Result<Self, LogError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(SESSION_FILE);
        if let Ok(bytes) = fs::read(&path) {
            if !bytes.is_empty() && !bytes.ends_with(b"\n") {
                let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                let f = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
                f.set_len(keep as u64).map_err(io_err(&path))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            file,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        let path = self.dir.join(SESSION_FILE);
        let mut line = serde_json::to_string(record).expect("log record serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        self.file.flush().map_err(io_err(&path))
    }

    pub fn append_step(&mut self, step: &StepRecord, catalog: &ComponentCatalog) -> Result<(), LogError> {
        let det_path = self.dir.join(det_file_name(step.iteration));
        let mut text = format_report_lines(&step.detection, catalog);
        text.push('\n');
        fs::write(&det_path, text).map_err(io_err(&det_path))?;
        self.append(&LogRecord::Step(Box::new(step.clone())))
    }

    pub fn append_finish(&mut self, result: &SessionResult) -> Result<(), LogError> {
        self.append(&LogRecord::Finish {
            success: result.success,
            termination: result.termination,
            detail: result.detail.clone(),
            total_seconds: result.total_seconds,
        })
    }
}

pub fn det_file_name(iteration: usize) -> String {
    format!("det_{iteration:03}.txt")
}

pub fn read_log(dir: &Path) -> Result<Vec<LogRecord>, LogError> {
    let path = dir.join(SESSION_FILE);
    let reader = BufReader::new(File::open(&path).map_err(io_err(&path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(rec) => out.push(rec),
            // A torn final line from a crash mid-write is dropped; anything
            // earlier is real corruption.
            Err(_) if is_last_line(&path, i) => break,
            Err(e) => {
                return Err(LogError::Corrupt {
                    path,
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn is_last_line(path: &Path, index: usize) -> bool {
    fs::read_to_string(path)
        .map(|s| s.lines().count() == index + 1)
        .unwrap_or(false)
}

/// State recovered from an interrupted session's log.
#[derive(Debug, Clone, PartialEq)]
pub struct ResumePoint {
    pub steps: Vec<StepRecord>,
}

impl ResumePoint {
    pub fn from_dir(dir: &Path) -> Result<Self, LogError> {
        let mut steps = Vec::new();
        for rec in read_log(dir)? {
            match rec {
                LogRecord::Step(s) => steps.push(*s),
                LogRecord::Finish { .. } => return Err(LogError::AlreadyFinished(dir.to_path_buf())),
            }
        }
        Ok(Self { steps })
    }

    pub fn last_iteration(&self) -> usize {
        self.steps.last().map_or(0, |s| s.iteration)
    }
}
