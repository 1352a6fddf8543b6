//! REST backend for the annotation loop: lists videos awaiting labels,
//! serves their cached frame strips, and records labels and occurrence
//! intervals in the corpus manifest.
//!
//! Every mutation carries the client's view of the video's `version`. A
//! mismatch is answered with `409 Conflict` and leaves the manifest alone.
//! Accepted mutations are written to disk before the response is sent.

mod api;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;
use flukefinder::corpus::{CorpusError, CorpusLock, FrameCache, LockError, Manifest};
use thiserror::Error;
use tokio::sync::RwLock;

pub use api::{ApiError, FrameRef, IntervalBody, LabelBody, Progress, Task};

pub const MANIFEST_FILE: &str = "manifest.ndjson";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub corpus_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub frame_cache: PathBuf,
    /// Root seed for machine-assigned irrelevant intervals.
    pub seed: u64,
}

impl ServiceConfig {
    /// Standard layout under one corpus directory.
    pub fn for_corpus(corpus_dir: impl Into<PathBuf>, seed: u64) -> Self {
        let corpus_dir = corpus_dir.into();
        Self {
            manifest_path: corpus_dir.join(MANIFEST_FILE),
            frame_cache: corpus_dir.join("frames"),
            corpus_dir,
            seed,
        }
    }
}

pub(crate) struct Shared {
    pub(crate) config: ServiceConfig,
    pub(crate) frames: FrameCache,
    /// Readers share; writers take the lock for the whole
    /// validate-persist-swap sequence, which serializes all mutations.
    pub(crate) manifest: RwLock<Manifest>,
    _lock: CorpusLock,
}

/// An open corpus, exclusively locked for the lifetime of the service.
#[derive(Clone)]
pub struct AnnotationService {
    shared: Arc<Shared>,
}

impl AnnotationService {
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&config.corpus_dir).map_err(|source| CorpusError::Io {
            path: config.corpus_dir.clone(),
            source,
        })?;
        let lock = CorpusLock::acquire(&config.corpus_dir)?;
        let manifest = Manifest::load_or_default(&config.manifest_path)?;
        Ok(Self {
            shared: Arc::new(Shared {
                frames: FrameCache::new(&config.frame_cache),
                config,
                manifest: RwLock::new(manifest),
                _lock: lock,
            }),
        })
    }

    pub fn router(&self) -> Router {
        api::router(self.shared.clone())
    }

    /// Current in-memory manifest (identical to the file after every ack).
    pub async fn manifest(&self) -> Manifest {
        self.shared.manifest.read().await.clone()
    }
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let service = AnnotationService::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
