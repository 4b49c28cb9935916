//! Versioned JSON reports.

use std::fs;
use std::path::Path;

use canoise_core::indep_tests::Verdict;
use canoise_core::inference::{Decision, Evidence};
use serde::{Deserialize, Serialize};

use crate::benchmark::BenchmarkResult;
use crate::table1::Table1Result;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Results {
    Verdict(Verdict),
    Decision(Decision),
    InferenceFailure { error: String, evidence: Vec<Evidence> },
    Table1(Table1Result),
    Benchmark(BenchmarkResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Arguments as given on the command line.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub results: Results,
    /// Wall-clock data; not part of report comparisons.
    pub timing: Timing,
}

impl Report {
    pub fn new(command: &str, args: &[String], config: serde_json::Value, seeds: Vec<u64>, results: Results) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            config,
            seeds,
            results,
            timing: Timing::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Copy with the timing block cleared, for comparisons.
    pub fn comparable(&self) -> Self {
        Report {
            timing: Timing::default(),
            ..self.clone()
        }
    }

    /// Writes to `path`, or to stdout when no path is given.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => fs::write(p, self.to_json())
                .map_err(|e| CliError::write(format!("cannot write report {}: {e}", p.display()))),
            None => {
                print!("{}", self.to_json());
                Ok(())
            }
        }
    }
}
