//! Layered facets of a solid-on-solid interface pushed up by a Bernoulli
//! bulk excess.
//!
//! The crate covers the continuum side (Wulff shapes, optimal stacks, the
//! critical bulk excesses where a new layer appears) and the lattice side
//! (height fields, level-line contours, a Metropolis sampler and shape
//! metrics for comparing samples with predicted stacks).

pub mod error;
pub mod geometry;
pub mod lattice;
pub mod metrics;
pub mod norm;
pub mod phase;
pub mod sampler;
pub mod stack;
pub mod wulff;

pub use error::{Error, Result};
