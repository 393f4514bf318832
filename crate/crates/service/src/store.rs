//! The append-only log: one JSON object per line, tagged `session` or
//! `answer`, fsynced before any request that wrote it is acknowledged.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot};

use latentscope_core::experiment::AnswerRecord;

use crate::session::SessionRecord;
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEntry {
    Session(SessionRecord),
    Answer(AnswerRecord),
}

#[derive(Debug, Default)]
pub struct Recovered {
    pub entries: Vec<LogEntry>,
    /// Length of the intact prefix; anything after it is a torn write.
    pub valid_len: u64,
}

/// Reads every complete line of the log. A trailing fragment without a
/// newline never got acknowledged and is ignored; a malformed complete line
/// is an error.
pub fn recover(path: &Path) -> Result<Recovered, ServiceError> {
    let mut raw = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut raw).map_err(|e| ServiceError::io(path, e))?;
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Recovered::default()),
        Err(e) => return Err(ServiceError::io(path, e)),
    }
    let valid_len = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut entries = Vec::new();
    for (n, line) in raw[..valid_len].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let entry = serde_json::from_slice(line).map_err(|e| {
            ServiceError::Config(format!("{}: line {}: {e}", path.display(), n + 1))
        })?;
        entries.push(entry);
    }
    Ok(Recovered { entries, valid_len: valid_len as u64 })
}

struct Request {
    line: Vec<u8>,
    done: oneshot::Sender<io::Result<()>>,
}

/// Single writer thread. Requests that queue up while a sync is in flight
/// are written and synced together.
#[derive(Clone)]
pub struct LogWriter {
    tx: mpsc::Sender<Request>,
}

const MAX_BATCH: usize = 1024;

impl LogWriter {
    /// Opens `path` for appending after cutting it back to `valid_len`.
    pub fn open(path: &Path, valid_len: u64) -> Result<Self, ServiceError> {
        let file = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path)
            .map_err(|e| ServiceError::io(path, e))?;
        file.set_len(valid_len).map_err(|e| ServiceError::io(path, e))?;
        Ok(Self::from_file(file, valid_len))
    }

    /// `file` must be positioned at `len`.
    pub fn from_file(file: File, len: u64) -> Self {
        let (tx, rx) = mpsc::channel(4 * MAX_BATCH);
        std::thread::Builder::new()
            .name("answer-log".into())
            .spawn(move || writer_loop(file, len, rx))
            .expect("spawn log writer");
        LogWriter { tx }
    }

    /// Resolves once the entry is on disk.
    pub async fn append(&self, entry: &LogEntry) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry).map_err(io::Error::other)?;
        line.push(b'\n');
        let (done, wait) = oneshot::channel();
        self.tx
            .send(Request { line, done })
            .await
            .map_err(|_| io::Error::other("log writer stopped"))?;
        wait.await.map_err(|_| io::Error::other("log writer stopped"))?
    }
}

fn writer_loop(mut file: File, mut len: u64, mut rx: mpsc::Receiver<Request>) {
    use std::io::{Seek, SeekFrom};
    let mut poisoned = false;
    while let Some(first) = rx.blocking_recv() {
        let mut batch = vec![first];
        while batch.len() < MAX_BATCH {
            match rx.try_recv() {
                Ok(r) => batch.push(r),
                Err(_) => break,
            }
        }
        let buf: Vec<u8> = batch.iter().flat_map(|r| r.line.iter().copied()).collect();
        let result = if poisoned {
            Err(io::Error::other("log unusable after an earlier failed write"))
        } else {
            file.seek(SeekFrom::Start(len))
                .and_then(|_| file.write_all(&buf))
                .and_then(|_| file.sync_data())
        };
        match &result {
            Ok(()) => len += buf.len() as u64,
            Err(e) => {
                tracing::error!("answer log write failed: {e}");
                // drop the partial batch so later lines start clean
                if !poisoned && file.set_len(len).is_err() {
                    poisoned = true;
                }
            }
        }
        for r in batch {
            let reply = match &result {
                Ok(()) => Ok(()),
                Err(e) => Err(io::Error::new(e.kind(), e.to_string())),
            };
            let _ = r.done.send(reply);
        }
    }
}
