//! Simulation of structural causal models with hidden variables, regression
//! and conditional-variance independence tests, and potential-cause
//! inference from independence asymmetries.

pub mod error;
pub mod estimators;
pub mod graph;
pub mod indep_tests;
pub mod inference;
pub mod oracle;
pub mod scm;

pub use error::{Error, Result};
