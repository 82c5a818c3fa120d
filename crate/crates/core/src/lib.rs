//! Flood detection over time series of multispectral satellite images.
//!
//! The pipeline has four stages:
//!
//! 1. [`rse`] scores every incoming frame against recursively maintained
//!    per-pixel statistics and flags frames whose overall similarity drops
//!    below the running mean by more than `m` standard deviations.
//! 2. For flagged frames, [`rse::binary_change_map`] thresholds the per-pixel
//!    similarity map into a change mask.
//! 3. [`idss`] labels pixels as Land, Water or Cloud with a k-nearest-neighbour
//!    vote over class prototypes, producing a confidence map and per-pixel
//!    explanations that point back at real training pixels.
//! 4. [`decision`] turns the share of newly changed Water pixels into a
//!    Flooding / NoFlooding call and reports the onset.
//!
//! Dense work (segmentation) only ever runs on frames flagged in stage 1.
//!
//! Per-pixel loops run on rayon when the `parallel` feature is enabled (the
//! default). Every parallel path produces results identical to its
//! sequential counterpart; see [`Execution`].

pub mod decision;
mod error;
mod exec;
pub mod features;
pub mod idss;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod rse;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::Execution;
