//! Critical site percolation on the triangular lattice: arm events in annuli,
//! winding of crossings, path surgery and correlation inequalities.

pub mod arms;
pub mod boolcube;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod lattice;
pub mod sample;
pub mod surgery;
pub mod winding;

pub use error::{Error, Result};
