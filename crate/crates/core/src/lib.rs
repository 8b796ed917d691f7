//! Count-Sketch based sparse recovery.
//!
//! The crate exposes:
//! - [`hashing::HashFamily`], seeded pairwise-independent bucket and sign hashes.
//! - [`countsketch::CountSketch`], the linear sketch with median-of-rows point estimates.
//! - [`recovery`], top-2k thresholding for l2/l2 and multi-scale subsampled
//!   recovery for l1/l1, plus the exact tail-error oracle.
//! - [`instances`], generators for hard and generic test signals.
//! - [`harness`], a deterministic Monte-Carlo runner with JSON/CSV reports.
//! - [`cli`], the `sparselab` command-line frontend.

pub mod cli;
pub mod countsketch;
mod error;
pub mod harness;
pub mod hashing;
pub mod instances;
pub mod recovery;
pub mod seed;
mod signal;

pub use countsketch::{CountSketch, SketchConfig};
pub use error::{Error, Result};
pub use hashing::HashFamily;
pub use signal::{Norm, SignalVector};
