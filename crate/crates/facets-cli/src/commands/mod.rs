pub mod analyze;
pub mod norm;
pub mod phase;
pub mod simulate;
