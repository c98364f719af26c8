//! Core building blocks for a chunked video action-recognition monitor.
//!
//! The crate is split along the path a chunk takes through the system:
//!
//! - [`svf`]: the raw-RGB fixture container used for streams and chunks.
//! - [`ingest`]: stream sources, fixed-window segmentation and chunk storage.
//! - [`pipeline`]: frame sampling, resize/crop/flip and NCTHW packing.
//! - [`classify`]: class labels, the classifier contract, loss math and the
//!   desk-scale toy model.
//! - [`eval`]: dataset splits, annotation files, the metric suite, throughput
//!   and capacity planning.
//! - [`fixtures`]: deterministic synthetic streams driven by an event script.
//!
//! Nothing in this crate performs network or database I/O, so it also builds
//! for `wasm32-unknown-unknown`.

pub mod classify;
pub mod eval;
pub mod fixtures;
pub mod ingest;
pub mod label;
pub mod pipeline;
pub mod svf;

pub use label::{ClassLabel, ScoreVector};
