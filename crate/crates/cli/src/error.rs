use std::path::PathBuf;

use flukefinder::acquisition::AcquisitionError;
use flukefinder::backbone::BackboneError;
use flukefinder::command::CommandError;
use flukefinder::corpus::{CorpusError, LockError};
use flukefinder::evaluation::EvalError;
use flukefinder::framepipe::FramepipeError;
use flukefinder::seqclassifier::SeqError;
use flukefinder_annotate::ServiceError;
use thiserror::Error;

use crate::config::ConfigError;

pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Framepipe(#[from] FramepipeError),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
    #[error(transparent)]
    Classifier(#[from] SeqError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
