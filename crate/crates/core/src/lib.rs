//! Finite, windowed combinatorics for subsets of the naturals: gap structure,
//! sumsets and representation counts, sum-hypergraph extraction, and finite
//! ict/inp pattern witnesses, tied together by a classification pipeline.

mod bitset;
pub mod classify;
pub mod error;
pub mod gaps;
pub mod hypergraph;
pub mod patterns;
pub mod setcore;
pub mod sumset;

pub use error::{Error, Result};
pub use setcore::{generate, parse_set_file, GroundSet, SetKind, SetSpec};
