//! File formats, corpus bundles and the `veriprop` command-line driver over
//! [`veriprop_core`].

pub mod bundle;
pub mod cli;
pub mod error;
pub mod io;

pub use error::{Error, Result};
