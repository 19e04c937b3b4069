//! Weakly-supervised visual narration detection.
//!
//! Given instructional-video clips with precomputed video, word and sentence
//! features, this crate derives "is the narrator showing what they say?"
//! labels from keystep annotations ([`curation`]), trains a dual-encoder
//! scorer with a contrastive objective ([`trainer`], [`objective`]),
//! bootstraps itself through pseudo-labels on unlabeled clips, and measures
//! detection quality with ROC-AUC ([`eval`]). An audio-only detector over
//! log-mel statistics lives in [`audio`].

pub mod audio;
pub mod corpus;
pub mod curation;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod objective;
pub mod rng;
pub mod trainer;

pub use corpus::{ClipRecord, Corpus, Dims, Schema, Split, SynthConfig};
pub use curation::{CuratedSet, SetName};
pub use encoder::DualEncoder;
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use trainer::{Checkpoint, LossKind, TrainConfig};
