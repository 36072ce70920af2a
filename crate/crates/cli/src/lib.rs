//! Command-line front end for `tree_kaczmarz`: JSON problem files, random
//! instance generation, experiment drivers and CSV output.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod output;
pub mod problem;

pub use error::{CliError, Result};
