//! Durable storage for the event log: one JSON event per line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::Event;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed log line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

/// Where appended events go before a request is acknowledged.
pub trait EventStore: Send {
    /// Appends all events or none. Must not return before they are durable.
    fn append(&mut self, events: &[Event]) -> io::Result<()>;
}

/// Keeps the serialized log in memory. Cloning shares the buffer, so tests
/// can inspect what was "written".
#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    bytes: Arc<Mutex<Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contents(&self) -> Vec<u8> {
        self.bytes.lock().expect("memory store poisoned").clone()
    }
}

impl EventStore for MemoryStore {
    fn append(&mut self, events: &[Event]) -> io::Result<()> {
        let buf = encode(events)?;
        self.bytes.lock().expect("memory store poisoned").extend_from_slice(&buf);
        Ok(())
    }
}

/// Test hook for simulating crashes inside [`FileStore::append`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FailPoint {
    None = 0,
    /// Fail after validation, before anything reaches the file.
    BeforeFlush = 1,
    /// Write half of the batch, then fail without a trailing newline.
    TornWrite = 2,
}

#[derive(Debug, Clone, Default)]
pub struct FailPointHandle(Arc<AtomicU8>);

impl FailPointHandle {
    pub fn set(&self, point: FailPoint) {
        self.0.store(point as u8, Ordering::SeqCst);
    }

    fn get(&self) -> FailPoint {
        match self.0.load(Ordering::SeqCst) {
            1 => FailPoint::BeforeFlush,
            2 => FailPoint::TornWrite,
            _ => FailPoint::None,
        }
    }
}

pub struct FileStore {
    path: PathBuf,
    file: File,
    fail: FailPointHandle,
}

impl FileStore {
    /// Opens (creating if needed) a log file and returns the events already
    /// in it. A torn final line left by a crash is discarded.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Event>), LogError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (events, complete_len) = parse_log(&bytes)?;
        if complete_len < bytes.len() {
            file.set_len(complete_len as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok((FileStore { path, file, fail: FailPointHandle::default() }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn fail_point(&self) -> FailPointHandle {
        self.fail.clone()
    }
}

impl FileStore {
    fn write_batch(&mut self, buf: &[u8]) -> io::Result<()> {
        match self.fail.get() {
            FailPoint::None => {}
            FailPoint::BeforeFlush => return Err(io::Error::other("injected crash before flush")),
            FailPoint::TornWrite => {
                let half = buf.len() / 2;
                self.file.write_all(&buf[..half.max(1)])?;
                self.file.flush()?;
                return Err(io::Error::other("injected torn write"));
            }
        }
        self.file.write_all(buf)?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

impl EventStore for FileStore {
    fn append(&mut self, events: &[Event]) -> io::Result<()> {
        let buf = encode(events)?;
        let before = self.file.metadata()?.len();
        let result = self.write_batch(&buf);
        if result.is_err() {
            // Drop whatever part of the batch reached the file so a failed
            // append leaves the log as it was.
            let _ = self.file.set_len(before);
            let _ = self.file.sync_data();
        }
        result
    }
}

fn encode(events: &[Event]) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    for event in events {
        serde_json::to_writer(&mut buf, event).map_err(io::Error::other)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

/// Parses newline-terminated events, returning them and the byte length of
/// the complete lines. Bytes after the last newline are ignored.
pub fn parse_log(bytes: &[u8]) -> Result<(Vec<Event>, usize), LogError> {
    let complete_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let mut events = Vec::new();
    for (idx, line) in bytes[..complete_len].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let event = serde_json::from_slice(line)
            .map_err(|e| LogError::MalformedLine { line: idx + 1, reason: e.to_string() })?;
        events.push(event);
    }
    Ok((events, complete_len))
}

/// Reads a log file without modifying it.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<Event>, LogError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    Ok(parse_log(&bytes)?.0)
}

/// Writes events to a fresh file, one per line.
pub fn write_log(path: impl AsRef<Path>, events: &[Event]) -> io::Result<()> {
    let mut file = File::create(path)?;
    file.write_all(&encode(events)?)?;
    file.sync_all()
}
