//! Training driver, file formats and reports on top of `relmimic-core`.

pub use relmimic_core as core;

pub mod checkpoint;
pub mod config;
pub mod demo_file;
pub mod error;
pub mod report;
pub mod run;
pub mod train;

pub use config::{TrainConfig, Variant};
pub use error::{Error, Result};
