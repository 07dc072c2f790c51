//! WLSH: approximate k-nearest-neighbor search over one dataset under many
//! weighted `l_p` distance functions (`0 < p <= 2`).
//!
//! The library builds groups of single-function hash tables that several
//! weighted distance functions share, answers `(c,k)`-WNN queries by
//! collision counting with virtual rehashing, and accounts for simulated
//! 4KB-block I/O so benchmark numbers are comparable across configurations.

// `!(x > 0.0)`-style checks reject NaN along with the out-of-range values;
// the suggested `x <= 0.0` form would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bounds;
pub mod cli;
pub mod data;
pub mod error;
pub mod index;
pub mod lsh;
pub mod metric;
pub mod params;
pub mod partition;
pub mod query;
pub mod stable;

pub use data::{Dataset, Point, WeightVector};
pub use error::{Error, Result};
pub use metric::Metric;
