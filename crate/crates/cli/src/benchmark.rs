//! Monte-Carlo decision rates per preset, sample size and method.

use std::fmt::Write;

use canoise_core::indep_tests::Method;
use canoise_core::inference::{infer_potential_cause, CriterionConfig, Decision};
use canoise_core::oracle::YesNo;
use canoise_core::scm::presets::{preset_by_name, Preset};
use canoise_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn default_methods() -> Vec<Method> {
    vec![Method::Cv]
}
fn default_level() -> f64 {
    0.01
}
fn default_n_perm() -> usize {
    199
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub presets: Vec<String>,
    pub sizes: Vec<usize>,
    pub seeds: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_n_perm")]
    pub n_perm: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl BenchmarkConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: BenchmarkConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.presets.is_empty() {
            return Err("benchmark config lists no presets".into());
        }
        if self.sizes.is_empty() {
            return Err("benchmark config lists no sample sizes".into());
        }
        if self.seeds == 0 {
            return Err("benchmark config needs at least one seed".into());
        }
        if self.methods.is_empty() || self.methods.contains(&Method::Hsic) {
            return Err("methods must be a non-empty list of \"cv\" and \"nrr\"".into());
        }
        for p in &self.presets {
            preset_by_name(p).map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub preset: String,
    pub n: usize,
    pub method: Method,
    pub seeds: usize,
    pub expected: Option<YesNo>,
    /// Fraction of seeds returning PotentialCause(x -> y).
    pub forward_rate: f64,
    /// Fraction of seeds returning PotentialCause(y -> x).
    pub reverse_rate: f64,
    /// Fraction of seeds whose forward decision equals the expected one.
    pub accuracy: Option<f64>,
    /// Fraction of seeds with a claim the expected pattern does not license:
    /// any reverse claim, and a forward claim when the expected decision is No.
    pub false_potential_cause_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: BenchmarkConfig,
    pub cells: Vec<BenchmarkCell>,
}

/// Decisions in both directions for one replicate; data and test seeds are
/// both `seed`.
pub fn both_directions(p: &Preset, n: usize, seed: u64, method: Method, level: f64, n_perm: usize) -> Result<(Decision, Decision)> {
    let ds = p.model().sample(n, seed)?;
    let cfg = CriterionConfig {
        method,
        level,
        n_perm,
        seed,
        ..CriterionConfig::default()
    };
    let pool = p.pool();
    let pool: Vec<&str> = pool.iter().map(String::as_str).collect();
    let fwd = infer_potential_cause(&ds, &p.x, &p.y, &pool, &cfg).map_err(|e| e.error)?;
    let rev = infer_potential_cause(&ds, &p.y, &p.x, &pool, &cfg).map_err(|e| e.error)?;
    Ok((fwd, rev))
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate().map_err(Error::InvalidArgument)?;
    let mut cells = Vec::new();
    for name in &cfg.presets {
        let p = preset_by_name(name)?;
        for &n in &cfg.sizes {
            for &method in &cfg.methods {
                let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|k| cfg.base_seed + k).collect();
                let runs: Vec<(Decision, Decision)> = seeds
                    .par_iter()
                    .map(|s| both_directions(&p, n, *s, method, cfg.level, cfg.n_perm))
                    .collect::<Result<_>>()?;
                let k = runs.len() as f64;
                let fwd = runs.iter().filter(|r| r.0.is_potential_cause()).count();
                let rev = runs.iter().filter(|r| r.1.is_potential_cause()).count();
                let expected = p.expected.decision;
                let accuracy = expected.map(|e| {
                    runs.iter()
                        .filter(|r| (r.0.is_potential_cause()) == (e == YesNo::Yes))
                        .count() as f64
                        / k
                });
                let false_claims = runs
                    .iter()
                    .filter(|r| r.1.is_potential_cause() || (expected == Some(YesNo::No) && r.0.is_potential_cause()))
                    .count();
                cells.push(BenchmarkCell {
                    preset: p.name.to_string(),
                    n,
                    method,
                    seeds: runs.len(),
                    expected,
                    forward_rate: fwd as f64 / k,
                    reverse_rate: rev as f64 / k,
                    accuracy,
                    false_potential_cause_rate: false_claims as f64 / k,
                });
            }
        }
    }
    Ok(BenchmarkResult {
        config: cfg.clone(),
        cells,
    })
}

pub fn render(r: &BenchmarkResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<26} {:>7} {:>6} {:>8} {:>8} {:>8} {:>9}",
        "preset", "n", "method", "x->y", "y->x", "accuracy", "false-pc"
    );
    for c in &r.cells {
        let acc = c.accuracy.map_or("-".to_string(), |a| format!("{a:.2}"));
        let _ = writeln!(
            s,
            "{:<26} {:>7} {:>6} {:>8.2} {:>8.2} {:>8} {:>9.2}",
            c.preset,
            c.n,
            format!("{:?}", c.method).to_lowercase(),
            c.forward_rate,
            c.reverse_rate,
            acc,
            c.false_potential_cause_rate
        );
    }
    s
}
