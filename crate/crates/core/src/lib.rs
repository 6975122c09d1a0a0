//! Multi-exposure synthesis, exposure fusion and no-reference quality
//! ranking for building input / pseudo-ground-truth training pairs.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod exposure;
pub mod fusion;
pub mod imgcore;
pub mod iqa;
pub mod pipeline;
pub mod preview;
pub mod process;
pub mod pyramid;
pub mod synth;

pub use error::{Error, Result};
