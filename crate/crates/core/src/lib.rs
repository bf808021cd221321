//! Causal neural operators built from Schauder-basis neural filters and a
//! memorizing hypernetwork that weaves per-window filters into one causal model.

pub mod bench;
pub mod cli;
pub mod cno;
pub mod error;
pub mod filter;
pub mod net;
pub mod sde;
pub mod spaces;
pub mod weave;

pub use error::{Error, Result};
