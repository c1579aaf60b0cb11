//! Pipeline for detecting and describing entity-level events in timestamped
//! news text: corpus ingestion, event-coincidence labeling, distributed-memory
//! sentence embeddings with hierarchical softmax, a small feed-forward
//! relevance classifier, cost-sensitive evaluation, aggregate indices, and
//! ranked excerpt extraction. A deterministic synthetic-corpus generator
//! supports end-to-end validation.

// The numeric kernels index flat arrays with one shared loop variable
// across several buffers; iterator forms would hide that addressing.
#![allow(clippy::needless_range_loop)]

pub mod binio;
pub mod classify;
pub mod corpus;
pub mod describe;
pub mod embed;
pub mod error;
pub mod evaluate;
pub mod labeling;
pub(crate) mod mathutil;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
