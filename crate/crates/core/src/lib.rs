//! Constructibility analysis for range-only planar localization.

pub mod error;
pub mod fixtures;
pub mod geom;
pub mod global;
pub mod local;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod unicycle;

pub use error::{Error, Result};
