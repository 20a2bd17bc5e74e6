//! Submodular information measures for targeted batch active learning.

pub mod error;
pub mod functions;
pub mod greedy;
pub mod harness;
pub mod linalg;
pub mod scenarios;
pub mod similarity;
pub mod surrogate;
pub mod verify;

pub use error::{Error, Result};
