//! Sound event detection toolkit for separation-aware training pipelines.
//!
//! - [`spl`]: selective pseudo-labeling of separated sources
//! - [`fusion`]: pair, class-wise and logistic score fusion
//! - [`decode`]: thresholding, median filtering and event extraction
//! - [`metrics`]: collar-based event F1 and PSDS
//! - [`synth`]: deterministic synthetic datasets and detectors
//! - [`experiment`]: the end-to-end synthetic comparison

pub mod cli;
pub mod decode;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod fusion;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod spl;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ClassVocabulary, Event, EventList, FrameGrid, SeparationManifest, TagPrediction, WeakLabelSet, OTHER_LABEL,
};
