//! Append-only session files: one newline-delimited JSON record per line,
//! a `session` header first and then every envelope in seq order.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{CreateSession, SeatToken, SessionEnvelope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "record")]
pub enum Record {
    Session(SessionHeader),
    Envelope(SessionEnvelope),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub created_ms: u64,
    pub request: CreateSession,
    pub seats: Vec<SeatToken>,
    pub game_master_token: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{0}: no session header")]
    MissingHeader(PathBuf),
}

/// Records read back from disk, plus what had to be dropped.
#[derive(Debug)]
pub struct Loaded {
    pub header: SessionHeader,
    pub envelopes: Vec<SessionEnvelope>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct SessionStore {
    path: PathBuf,
    file: File,
}

pub fn session_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.ndjson"))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

impl SessionStore {
    /// Creates the file for a new session and writes its header.
    pub fn create(dir: &Path, header: &SessionHeader) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = session_path(dir, &header.session_id);
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(io(&path))?;
        let mut store = Self { path, file };
        store.append(&Record::Session(header.clone()))?;
        Ok(store)
    }

    /// Reopens an existing file for appending, first cutting off a torn
    /// last line at `valid_len` bytes.
    pub fn reopen(path: &Path, valid_len: u64) -> Result<Self, StoreError> {
        let file = OpenOptions::new().append(true).open(path).map_err(io(path))?;
        file.set_len(valid_len).map_err(io(path))?;
        Ok(Self {
            path: path.to_owned(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &Record) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io(&self.path))?;
        self.file.flush().map_err(io(&self.path))
    }

    pub fn append_envelopes(&mut self, envelopes: &[SessionEnvelope]) -> Result<(), StoreError> {
        for e in envelopes {
            self.append(&Record::Envelope(e.clone()))?;
        }
        Ok(())
    }
}

/// Reads a session file. A torn final line (no newline, or unparsable) is
/// dropped with a warning; a bad record anywhere else is an error.
/// Returns the records and the byte length of the valid prefix.
pub fn load(path: &Path) -> Result<(Loaded, u64), StoreError> {
    let file = File::open(path).map_err(io(path))?;
    let mut reader = BufReader::new(file);
    let mut lines = Vec::new();
    loop {
        let mut buf = String::new();
        let n = reader.read_line(&mut buf).map_err(io(path))?;
        if n == 0 {
            break;
        }
        lines.push(buf);
    }

    let mut header = None;
    let mut envelopes = Vec::new();
    let mut warnings = Vec::new();
    let mut valid_len = 0u64;
    let count = lines.len();
    for (i, raw) in lines.into_iter().enumerate() {
        let last = i + 1 == count;
        let complete = raw.ends_with('\n');
        let text = raw.trim_end();
        if text.is_empty() && complete {
            valid_len += raw.len() as u64;
            continue;
        }
        let parsed = if complete {
            serde_json::from_str::<Record>(text).map_err(|e| e.to_string())
        } else {
            Err("record is not newline-terminated".to_owned())
        };
        match parsed {
            Ok(Record::Session(h)) if header.is_none() && i == 0 => header = Some(h),
            Ok(Record::Session(_)) => {
                return Err(StoreError::Corrupt {
                    path: path.to_owned(),
                    line: i + 1,
                    message: "unexpected session header".into(),
                })
            }
            Ok(Record::Envelope(e)) => {
                if e.seq != envelopes.len() as u64 {
                    return Err(StoreError::Corrupt {
                        path: path.to_owned(),
                        line: i + 1,
                        message: format!("expected seq {}, found {}", envelopes.len(), e.seq),
                    });
                }
                envelopes.push(e);
            }
            Err(message) if last => {
                warnings.push(format!("line {}: dropped torn record ({message})", i + 1));
                break;
            }
            Err(message) => {
                return Err(StoreError::Corrupt {
                    path: path.to_owned(),
                    line: i + 1,
                    message,
                })
            }
        }
        valid_len += raw.len() as u64;
    }
    let header = header.ok_or_else(|| StoreError::MissingHeader(path.to_owned()))?;
    Ok((
        Loaded {
            header,
            envelopes,
            warnings,
        },
        valid_len,
    ))
}
