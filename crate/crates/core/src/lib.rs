//! Tight spans of finite terminal metrics, randomized contraction-based flow
//! sparsifiers for up to five terminals, concurrent-flow quality evaluation,
//! and a six-terminal hard instance with its loss diagnostics.

pub mod cli;
pub mod decompose5;
pub mod error;
pub mod flowlp;
pub mod graphcore;
pub mod hard6;
pub mod metric;
pub mod rational;
pub mod tightspan;

pub use error::{Error, Result};
pub use rational::Q;
