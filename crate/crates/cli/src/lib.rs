//! Configuration, experiment drivers and file output for `acopt`.

// `!(a < b)` comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod run;
pub mod verify;

pub use config::{ConfigError, Mode, RunConfig};
pub use run::{build, run, RunError, Setup, Summary};
