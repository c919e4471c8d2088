//! File formats, configuration and the `ccl` command line around
//! [`ccl_core`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod signal;
pub mod tables;
pub mod weights;

pub use error::IoError;
pub use manifest::ArchManifest;
