//! Append-only JSON-lines journal of session events.
//!
//! Every event is flushed and synced before the request that caused it is
//! acknowledged. On open, a torn final line (crash mid-write) is discarded
//! and truncated away; damage anywhere else is an error.

use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::{Result, SessionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Reference,
    Impaired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionStarted { subject: String, seed: u64, at_ms: u64 },
    Served { subject: String, item: usize, role: Role, at_ms: u64 },
    Scored { subject: String, item: usize, condition: String, score: u8, at_ms: u64 },
}

pub struct Journal {
    file: File,
    path: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.to_path_buf(), source }
}

impl Journal {
    /// Opens (creating if needed) and replays the journal.
    pub fn open(path: &Path) -> Result<(Journal, Vec<Event>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err(path))?;
        let mut text = Vec::new();
        file.read_to_end(&mut text).map_err(io_err(path))?;
        let (events, good_len) = parse(&text, path)?;
        if good_len < text.len() {
            file.set_len(good_len as u64).map_err(io_err(path))?;
            file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
        }
        Ok((Journal { file, path: path.to_path_buf() }, events))
    }

    pub fn append(&mut self, event: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Parsed events and the byte length of the intact prefix; `path` only
/// labels errors.
pub fn parse(text: &[u8], path: &Path) -> Result<(Vec<Event>, usize)> {
    let mut events = Vec::new();
    let mut offset = 0;
    let mut lines = text.split_inclusive(|&b| b == b'\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let last = lines.peek().is_none();
        let complete = line.ends_with(b"\n");
        match serde_json::from_slice::<Event>(line.trim_ascii()) {
            Ok(ev) if complete => events.push(ev),
            _ if line.trim_ascii().is_empty() && complete => {}
            // a crash can only tear the final write
            _ if last => break,
            Err(e) => {
                return Err(SessionError::Journal { path: path.to_path_buf(), line: i + 1, reason: e.to_string() });
            }
            Ok(_) => unreachable!("only the last line can lack a newline"),
        }
        offset += line.len();
    }
    Ok((events, offset))
}
