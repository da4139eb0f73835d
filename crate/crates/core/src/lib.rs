//! Train fully-connected classifiers under controlled label noise and measure
//! how each layer contributes to fitting, generalization and resilience.

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod report;
pub mod rollback;
pub mod seed;

pub use error::{Error, Result};
