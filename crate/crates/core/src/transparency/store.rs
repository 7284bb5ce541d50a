//! Checkpoint stores stand in for the gossip layer: an in-process store
//! for tests and an append-only file of base64 lines for the CLI.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use thiserror::Error;

use super::checkpoint::{Checkpoint, CodecError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint record at line {line}: {source}")]
    Corrupt { line: usize, source: CodecError },
    #[error("invalid base64 at line {0}")]
    Base64(usize),
}

pub trait CheckpointStore {
    fn publish(&mut self, chkpt: &Checkpoint) -> Result<(), StoreError>;
    /// All gossiped checkpoints in append order.
    fn fetch_all(&self) -> Result<Vec<Checkpoint>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryCheckpointStore {
    checkpoints: Vec<Checkpoint>,
}

impl MemoryCheckpointStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CheckpointStore for MemoryCheckpointStore {
    fn publish(&mut self, chkpt: &Checkpoint) -> Result<(), StoreError> {
        self.checkpoints.push(chkpt.clone());
        Ok(())
    }

    fn fetch_all(&self) -> Result<Vec<Checkpoint>, StoreError> {
        Ok(self.checkpoints.clone())
    }
}

/// One base64 line per checkpoint; the file is only ever appended to.
#[derive(Debug)]
pub struct FileCheckpointStore {
    path: PathBuf,
}

impl FileCheckpointStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileCheckpointStore { path: path.into() }
    }
}

impl CheckpointStore for FileCheckpointStore {
    fn publish(&mut self, chkpt: &Checkpoint) -> Result<(), StoreError> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        writeln!(file, "{}", BASE64.encode(chkpt.encode()))?;
        Ok(())
    }

    fn fetch_all(&self) -> Result<Vec<Checkpoint>, StoreError> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        let reader = BufReader::new(std::fs::File::open(&self.path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bytes = BASE64.decode(line.trim()).map_err(|_| StoreError::Base64(i + 1))?;
            let (chkpt, _) = Checkpoint::decode(&bytes)
                .map_err(|source| StoreError::Corrupt { line: i + 1, source })?;
            out.push(chkpt);
        }
        Ok(out)
    }
}
