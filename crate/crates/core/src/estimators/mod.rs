//! Nonparametric conditional-mean regression and two-stage conditional
//! variance estimation.

pub mod smoother;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::Dataset;
use smoother::{smooth, SmoothOpts, Smoothed};

pub const MIN_ROWS: usize = 50;
/// Below this row count the direct O(n²) engine is used.
pub const EXACT_MAX_ROWS: usize = 1500;
/// Rows used for median pairwise distances.
pub const MEDIAN_SUBSAMPLE: usize = 1000;
pub const DEFAULT_MULTIPLIERS: [f64; 7] = [0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoother {
    LocalLinear,
    NadarayaWatson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Median pairwise distance times n^(-1/(4+d)), per standardized predictor.
    Median,
    /// `Median` scaled by the multiplier with the smallest leave-one-out risk.
    MedianLoo { multipliers: Vec<f64> },
    /// Bandwidths in the predictors' original units.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Auto,
    Exact,
    Binned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub smoother: Smoother,
    pub bandwidth: BandwidthPolicy,
    pub engine: Engine,
    pub leave_one_out: bool,
    pub ridge: f64,
    /// Undersmoothing exponent: the cross-validated bandwidth is scaled by
    /// min(1, (n / UNDERSMOOTH_FROM)^-rate). Zero disables it.
    #[serde(default)]
    pub undersmooth_rate: f64,
}

/// Sample size above which undersmoothing starts.
pub const UNDERSMOOTH_FROM: f64 = 1000.0;

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            smoother: Smoother::LocalLinear,
            bandwidth: BandwidthPolicy::MedianLoo {
                multipliers: DEFAULT_MULTIPLIERS.to_vec(),
            },
            engine: Engine::Auto,
            leave_one_out: true,
            ridge: 1.0,
            undersmooth_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub predictors: Vec<String>,
    /// Per predictor, in original units.
    pub bandwidths: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Mean squared leave-one-out residual at the chosen bandwidth.
    pub loo_risk: f64,
    /// Residual variance inflation `1 + sum w^2` per row.
    pub inflation: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl RegressionFit {
    pub fn flagged_fraction(&self) -> f64 {
        self.flagged.iter().filter(|f| **f).count() as f64 / self.flagged.len().max(1) as f64
    }

    /// Residuals divided by the square root of their variance inflation.
    pub fn studentized(&self) -> Vec<f64> {
        self.residuals
            .iter()
            .zip(&self.inflation)
            .map(|(r, i)| r / i.sqrt())
            .collect()
    }
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Standardizes a column; zero spread is an error naming the column.
pub fn standardize(v: &[f64], name: &str) -> Result<Vec<f64>> {
    let (m, s) = mean_sd(v);
    if !(s > 1e-12 * m.abs().max(1.0)) {
        return Err(Error::Degenerate(name.to_string()));
    }
    Ok(v.iter().map(|a| (a - m) / s).collect())
}

/// Evenly spaced rows, at most `MEDIAN_SUBSAMPLE` of them.
pub fn subsample_indices(n: usize) -> Vec<usize> {
    if n <= MEDIAN_SUBSAMPLE {
        (0..n).collect()
    } else {
        (0..MEDIAN_SUBSAMPLE).map(|i| i * n / MEDIAN_SUBSAMPLE).collect()
    }
}

/// Median absolute pairwise difference over a deterministic subsample.
pub fn median_pairwise(v: &[f64]) -> f64 {
    let idx = subsample_indices(v.len());
    let mut d = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push((v[i] - v[j]).abs());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

fn base_bandwidths(cols: &[Vec<f64>]) -> Vec<f64> {
    let n = cols[0].len() as f64;
    let d = cols.len() as f64;
    let rate = n.powf(-1.0 / (4.0 + d));
    cols.iter()
        .map(|c| {
            let m = median_pairwise(c);
            // Heavily tied columns can have a zero median distance.
            (if m > 0.0 { m } else { 1.0 }) * rate
        })
        .collect()
}

fn opts(cfg: &RegressionConfig, inflation: bool) -> SmoothOpts {
    SmoothOpts {
        local_linear: cfg.smoother == Smoother::LocalLinear,
        leave_one_out: cfg.leave_one_out,
        ridge: cfg.ridge,
        inflation,
    }
}

fn run(cols: &[Vec<f64>], y: &[f64], h: &[f64], cfg: &RegressionConfig, inflation: bool) -> Smoothed {
    let exact = match cfg.engine {
        Engine::Exact => true,
        Engine::Binned => false,
        Engine::Auto => y.len() <= EXACT_MAX_ROWS,
    };
    smooth(cols, y, h, &opts(cfg, inflation), exact)
}

fn risk(y: &[f64], s: &Smoothed) -> f64 {
    y.iter().zip(&s.fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Regression of `target` on `predictors` given as raw columns.
pub fn fit_columns(
    target: &[f64],
    predictors: &[(&str, &[f64])],
    cfg: &RegressionConfig,
) -> Result<RegressionFit> {
    let n = target.len();
    if n < MIN_ROWS {
        return Err(Error::TooFewRows { needed: MIN_ROWS, got: n });
    }
    if predictors.is_empty() {
        return Err(Error::InvalidArgument("at least one predictor is required".into()));
    }
    if predictors.iter().any(|p| p.1.len() != n) {
        return Err(Error::InvalidArgument("predictor length differs from target".into()));
    }
    if let Some(i) = target.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            node: "target".into(),
            row: i,
        });
    }
    let mut cols = Vec::with_capacity(predictors.len());
    let mut sds = Vec::with_capacity(predictors.len());
    for (name, v) in predictors {
        cols.push(standardize(v, name)?);
        sds.push(mean_sd(v).1);
    }
    let (h, fit) = match &cfg.bandwidth {
        BandwidthPolicy::Fixed(hs) => {
            if hs.len() != cols.len() || hs.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument("fixed bandwidths must be positive, one per predictor".into()));
            }
            let h: Vec<f64> = hs.iter().zip(&sds).map(|(a, s)| a / s).collect();
            let fit = run(&cols, target, &h, cfg, true);
            (h, fit)
        }
        BandwidthPolicy::Median => {
            let h = base_bandwidths(&cols);
            let fit = run(&cols, target, &h, cfg, true);
            (h, fit)
        }
        BandwidthPolicy::MedianLoo { multipliers } => {
            let base = base_bandwidths(&cols);
            let mut best: Option<(f64, f64)> = None;
            // Model selection always scores leave-one-out fits.
            let sel_cfg = RegressionConfig {
                leave_one_out: true,
                ..cfg.clone()
            };
            for &m in multipliers {
                let h: Vec<f64> = base.iter().map(|b| b * m).collect();
                let r = risk(target, &run(&cols, target, &h, &sel_cfg, false));
                if best.is_none_or(|(_, br)| r < br) {
                    best = Some((m, r));
                }
            }
            if !(cfg.undersmooth_rate >= 0.0 && cfg.undersmooth_rate.is_finite()) {
                return Err(Error::InvalidArgument("undersmoothing rate must be non-negative".into()));
            }
            let shrink = (n as f64 / UNDERSMOOTH_FROM).powf(-cfg.undersmooth_rate).min(1.0);
            let m = best.map(|b| b.0).unwrap_or(1.0) * shrink;
            let h: Vec<f64> = base.iter().map(|b| b * m).collect();
            let fit = run(&cols, target, &h, cfg, true);
            (h, fit)
        }
    };
    let residuals: Vec<f64> = target.iter().zip(&fit.fitted).map(|(a, b)| a - b).collect();
    let loo_risk = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
    Ok(RegressionFit {
        predictors: predictors.iter().map(|p| p.0.to_string()).collect(),
        bandwidths: h.iter().zip(&sds).map(|(a, s)| a * s).collect(),
        fitted: fit.fitted,
        residuals,
        loo_risk,
        inflation: fit.inflation,
        flagged: fit.flagged,
    })
}

fn columns<'a>(ds: &Dataset, names: &[&'a str]) -> Result<Vec<(&'a str, Vec<f64>)>> {
    names.iter().map(|n| Ok((*n, ds.column(n)?))).collect()
}

pub fn kernel_regress(ds: &Dataset, target: &str, predictors: &[&str], cfg: &RegressionConfig) -> Result<RegressionFit> {
    if predictors.contains(&target) {
        return Err(Error::InvalidArgument(format!("target `{target}` is also a predictor")));
    }
    for (i, p) in predictors.iter().enumerate() {
        if predictors[..i].contains(p) {
            return Err(Error::InvalidArgument(format!("predictor `{p}` repeated")));
        }
    }
    let y = ds.column(target)?;
    let cols = columns(ds, predictors)?;
    let refs: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (*n, v.as_slice())).collect();
    fit_columns(&y, &refs, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    /// Floored local variance estimates.
    pub values: Vec<f64>,
    /// Second-stage fits before flooring.
    pub raw: Vec<f64>,
    pub first_stage: RegressionFit,
}

/// Two-stage estimate of Var(y | x, s): regress y, then regress the squared
/// studentized residuals on the same predictors.
pub fn conditional_variance_profile(
    ds: &Dataset,
    y: &str,
    x: &str,
    s: &[&str],
    cfg: &RegressionConfig,
) -> Result<VarianceProfile> {
    let mut preds = vec![x];
    preds.extend_from_slice(s);
    let first = kernel_regress(ds, y, &preds, cfg)?;
    let sq: Vec<f64> = first.studentized().iter().map(|r| r * r).collect();
    let cols = columns(ds, &preds)?;
    let refs: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (*n, v.as_slice())).collect();
    let second = fit_columns(&sq, &refs, cfg)?;
    Ok(VarianceProfile {
        values: second.fitted.iter().map(|v| v.max(0.0)).collect(),
        raw: second.fitted,
        first_stage: first,
    })
}
