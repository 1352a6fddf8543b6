use std::fs::{self, File, OpenOptions, TryLockError};
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const LOCK_FILE: &str = ".corpus.lock";

#[derive(Debug, Error)]
pub enum LockError {
    #[error("corpus at {0} is locked by another writer")]
    Held(PathBuf),
    #[error("cannot open lock file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Exclusive advisory lock on a corpus directory, released on drop.
#[derive(Debug)]
pub struct CorpusLock {
    _file: File,
    path: PathBuf,
}

impl CorpusLock {
    pub fn acquire(corpus_dir: &Path) -> Result<Self, LockError> {
        let path = corpus_dir.join(LOCK_FILE);
        let io_err = |source| LockError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(corpus_dir).map_err(io_err)?;
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err)?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file, path }),
            Err(TryLockError::WouldBlock) => Err(LockError::Held(corpus_dir.to_path_buf())),
            Err(TryLockError::Error(source)) => Err(LockError::Io { path, source }),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
