//! Library side of the `canoise` command-line tool: argument handling,
//! reports, table reproduction and benchmarks.

pub mod benchmark;
pub mod commands;
pub mod report;
pub mod table1;

pub use commands::{run, Cli, CliError};
