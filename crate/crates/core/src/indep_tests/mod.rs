//! Permutation-calibrated independence tests: plain HSIC, residual
//! independence (nrr) and conditional-variance independence (cv).

mod hsic;
mod strata;

use serde::{Deserialize, Serialize};

pub use hsic::{kernel_bandwidth, stratified_hsic, HsicOpts, HsicOutcome};
pub use strata::build_strata;

use crate::error::{Error, Result};
use crate::estimators::{fit_columns, kernel_regress, standardize, RegressionConfig, MIN_ROWS};
use crate::scm::Dataset;

pub const MIN_PERMUTATIONS: usize = 99;
/// Smallest row count accepted by the plain HSIC test.
pub const HSIC_MIN_ROWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hsic,
    Cv,
    Nrr,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" => Ok(Method::Cv),
            "nrr" => Ok(Method::Nrr),
            "hsic" => Ok(Method::Hsic),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}` (expected cv or nrr)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_rows: usize,
    /// Kernel widths of the two HSIC inputs.
    pub kernel_bandwidths: [f64; 2],
    /// Regression bandwidths of the first stage, original units.
    pub regression_bandwidths: Vec<f64>,
    pub flagged_fraction: f64,
    pub n_strata: usize,
    pub feature_rank: [usize; 2],
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub independent: bool,
    pub n_permutations: usize,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

/// Residual tests need regression bias small relative to the permutation
/// noise, so the first stage shrinks the cross-validated bandwidth for large
/// samples (to half at n = 20000).
pub const STAGE1_UNDERSMOOTH_RATE: f64 = 0.23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub level: f64,
    pub n_perm: usize,
    pub seed: u64,
    /// Target stratum size for conditional permutations.
    pub stratum_size: usize,
    pub min_stratum: usize,
    pub regression: RegressionConfig,
    pub exact_max_rows: usize,
    pub rank: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        let h = HsicOpts::default();
        TestConfig {
            level: 0.01,
            n_perm: 199,
            seed: 0,
            stratum_size: 20,
            min_stratum: 10,
            regression: RegressionConfig {
                undersmooth_rate: STAGE1_UNDERSMOOTH_RATE,
                ..RegressionConfig::default()
            },
            exact_max_rows: h.exact_max_rows,
            rank: h.rank,
        }
    }
}

impl TestConfig {
    fn hsic_opts(&self) -> HsicOpts {
        HsicOpts {
            exact_max_rows: self.exact_max_rows,
            rank: self.rank,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {} outside (0, 1)", self.level)));
        }
        if self.n_perm < MIN_PERMUTATIONS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_PERMUTATIONS} permutations, got {}",
                self.n_perm
            )));
        }
        if self.stratum_size < 2 {
            return Err(Error::InvalidArgument("stratum size must be at least 2".into()));
        }
        Ok(())
    }
}

fn verdict(method: Method, o: HsicOutcome, level: f64, seed: u64, diag: Diagnostics) -> Verdict {
    Verdict {
        method,
        statistic: o.statistic,
        p_value: o.p_value,
        level,
        independent: o.p_value > level,
        n_permutations: o.n_permutations,
        seed,
        diagnostics: Diagnostics {
            kernel_bandwidths: o.bandwidths,
            feature_rank: o.rank,
            exhaustive: o.exhaustive,
            ..diag
        },
    }
}

/// HSIC permutation test of two columns; `b` is permuted. When `n_perm`
/// reaches n! - 1 all permutations are enumerated.
pub fn hsic_perm_test(a: &[f64], b: &[f64], n_perm: usize, level: f64, seed: u64) -> Result<Verdict> {
    hsic_perm_test_with(a, b, n_perm, level, seed, &HsicOpts::default())
}

pub fn hsic_perm_test_with(
    a: &[f64],
    b: &[f64],
    n_perm: usize,
    level: f64,
    seed: u64,
    opts: &HsicOpts,
) -> Result<Verdict> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("columns differ in length".into()));
    }
    if a.len() < HSIC_MIN_ROWS {
        return Err(Error::TooFewRows {
            needed: HSIC_MIN_ROWS,
            got: a.len(),
        });
    }
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_PERMUTATIONS} permutations")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    let all = vec![(0..a.len()).collect::<Vec<_>>()];
    let o = stratified_hsic(b, a, &all, n_perm, seed, opts)?;
    let o = HsicOutcome {
        bandwidths: [o.bandwidths[1], o.bandwidths[0]],
        rank: [o.rank[1], o.rank[0]],
        ..o
    };
    let diag = Diagnostics {
        n_rows: a.len(),
        kernel_bandwidths: [0.0; 2],
        regression_bandwidths: Vec::new(),
        flagged_fraction: 0.0,
        n_strata: 1,
        feature_rank: [0; 2],
        exhaustive: false,
    };
    Ok(verdict(Method::Hsic, o, level, seed, diag))
}

fn check_columns(ds: &Dataset, y: &str, x: &str, s: &[&str]) -> Result<()> {
    let mut all = vec![y, x];
    all.extend_from_slice(s);
    for (i, c) in all.iter().enumerate() {
        ds.column_index(c)?;
        if all[..i].contains(c) {
            return Err(Error::InvalidArgument(format!("column `{c}` used twice")));
        }
    }
    if ds.n_rows() < MIN_ROWS {
        return Err(Error::TooFewRows {
            needed: MIN_ROWS,
            got: ds.n_rows(),
        });
    }
    Ok(())
}

fn residual_test(ds: &Dataset, y: &str, x: &str, s: &[&str], cfg: &TestConfig, method: Method) -> Result<Verdict> {
    cfg.validate()?;
    check_columns(ds, y, x, s)?;
    let mut preds = vec![x];
    preds.extend_from_slice(s);
    let first = kernel_regress(ds, y, &preds, &cfg.regression)?;
    let r = first.studentized();
    let s_cols: Vec<Vec<f64>> = s.iter().map(|c| ds.column(c)).collect::<Result<_>>()?;
    let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    let t = if s.is_empty() {
        if method == Method::Nrr {
            r
        } else {
            sq
        }
    } else {
        // Second stage on s alone: remove the part of the residual scale
        // explained by the conditioning set.
        let refs: Vec<(&str, &[f64])> = s.iter().zip(&s_cols).map(|(n, v)| (*n, v.as_slice())).collect();
        let stage2 = RegressionConfig {
            undersmooth_rate: 0.0,
            ..cfg.regression.clone()
        };
        let adj = fit_columns(&sq, &refs, &stage2)?;
        if method == Method::Nrr {
            let floor = 1e-3 * sq.iter().sum::<f64>() / sq.len() as f64;
            r.iter().zip(&adj.fitted).map(|(a, v)| a / v.max(floor).sqrt()).collect()
        } else {
            sq.iter().zip(&adj.fitted).map(|(a, b)| a - b).collect()
        }
    };
    let std_s: Vec<Vec<f64>> = s
        .iter()
        .zip(&s_cols)
        .map(|(n, v)| standardize(v, n))
        .collect::<Result<_>>()?;
    let strata = build_strata(&std_s, ds.n_rows(), cfg.stratum_size);
    let smallest = strata.iter().map(Vec::len).min().unwrap_or(0);
    if smallest < cfg.min_stratum {
        return Err(Error::StratumTooSmall {
            size: smallest,
            min: cfg.min_stratum,
        });
    }
    let xv = ds.column(x)?;
    let o = stratified_hsic(&xv, &t, &strata, cfg.n_perm, cfg.seed, &cfg.hsic_opts())?;
    let diag = Diagnostics {
        n_rows: ds.n_rows(),
        kernel_bandwidths: [0.0; 2],
        regression_bandwidths: first.bandwidths.clone(),
        flagged_fraction: first.flagged_fraction(),
        n_strata: strata.len(),
        feature_rank: [0; 2],
        exhaustive: false,
    };
    Ok(verdict(method, o, cfg.level, cfg.seed, diag))
}

/// Does the conditional variance of `y` given (`x`, `s`) vary with `x`?
/// Squared studentized leave-one-out residuals of y ~ {x} ∪ s, adjusted for
/// their regression on `s`, are tested against `x` with `x` permuted within
/// strata of `s`.
pub fn cv_independence_test(ds: &Dataset, y: &str, x: &str, s: &[&str], cfg: &TestConfig) -> Result<Verdict> {
    residual_test(ds, y, x, s, cfg, Method::Cv)
}

/// Are the regression residuals of y ~ {x} ∪ s independent of `x`?
pub fn nrr_independence_test(ds: &Dataset, y: &str, x: &str, s: &[&str], cfg: &TestConfig) -> Result<Verdict> {
    residual_test(ds, y, x, s, cfg, Method::Nrr)
}

pub fn run_test(method: Method, ds: &Dataset, y: &str, x: &str, s: &[&str], cfg: &TestConfig) -> Result<Verdict> {
    match method {
        Method::Cv => cv_independence_test(ds, y, x, s, cfg),
        Method::Nrr => nrr_independence_test(ds, y, x, s, cfg),
        Method::Hsic => {
            if !s.is_empty() {
                return Err(Error::InvalidArgument("plain HSIC takes no conditioning set".into()));
            }
            hsic_perm_test_with(
                &ds.column(x)?,
                &ds.column(y)?,
                cfg.n_perm,
                cfg.level,
                cfg.seed,
                &cfg.hsic_opts(),
            )
        }
    }
}
