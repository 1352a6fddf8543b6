//! Relevance classification of wildlife-encounter videos pulled from a video
//! platform.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`acquisition`]: search the platform, anonymize what comes back, fetch content.
//! * [`corpus`]: the manifest of labeled videos, occurrence intervals and the frame cache.
//! * [`framepipe`]: decode an interval, standardize it to exactly `T` frames, resize and normalize.
//! * [`backbone`]: per-frame embeddings from a frozen image network (ONNX or a built-in stand-in).
//! * [`seqclassifier`]: the two-layer GRU head, its gradients and training loop.
//! * [`evaluation`]: stratified k-fold cross-validation and report rendering.
//! * [`synthetic`]: feature corpora with a planted class signal.

pub mod acquisition;
pub mod backbone;
pub mod command;
pub mod corpus;
pub mod evaluation;
pub mod framepipe;
pub mod seed;
pub mod seqclassifier;
pub mod synthetic;
pub mod tensor_file;

pub use corpus::{Label, LocalId};
