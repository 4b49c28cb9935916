//! Potential-cause inference from independence asymmetries: search for a
//! conditioning set under which the forward test accepts, then require the
//! reverse test to reject for every subset of it.

use std::fmt;
use std::hash::Hasher;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indep_tests::{run_test, Method, TestConfig, Verdict};
use crate::oracle::{Cell, PatternRow};
use crate::scm::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub method: Method,
    pub level: f64,
    pub n_perm: usize,
    pub max_pool_size: usize,
    pub max_witness_size: usize,
    pub seed: u64,
    /// Remaining test settings; its level, permutation count and seed are
    /// overridden per test.
    pub test: TestConfig,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        CriterionConfig {
            method: Method::Cv,
            level: 0.01,
            n_perm: 199,
            max_pool_size: 8,
            max_witness_size: 3,
            seed: 0,
            test: TestConfig::default(),
        }
    }
}

impl CriterionConfig {
    fn validate(&self) -> Result<()> {
        if self.max_pool_size < self.max_witness_size {
            return Err(Error::InvalidArgument(format!(
                "max pool size {} is below max witness size {}",
                self.max_pool_size, self.max_witness_size
            )));
        }
        if self.method == Method::Hsic {
            return Err(Error::InvalidArgument("inference needs the cv or nrr method".into()));
        }
        Ok(())
    }

    /// Test settings for one (response, predictor, conditioning) triple.
    pub fn test_config(&self, response: &str, predictor: &str, s: &[&str]) -> TestConfig {
        TestConfig {
            level: self.level,
            n_perm: self.n_perm,
            seed: derive_seed(self.seed, response, predictor, s),
            ..self.test.clone()
        }
    }
}

/// Stable per-test seed from the base seed, the direction and the sorted
/// conditioning names (FNV-1a).
pub fn derive_seed(base: u64, response: &str, predictor: &str, s: &[&str]) -> u64 {
    struct Fnv(u64);
    impl Hasher for Fnv {
        fn finish(&self) -> u64 {
            self.0
        }
        fn write(&mut self, bytes: &[u8]) {
            for b in bytes {
                self.0 ^= *b as u64;
                self.0 = self.0.wrapping_mul(0x100_0000_01b3);
            }
        }
    }
    let mut h = Fnv(0xcbf2_9ce4_8422_2325);
    h.write(&base.to_le_bytes());
    for part in [response, predictor] {
        h.write(part.as_bytes());
        h.write(&[0xff]);
    }
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    for c in sorted {
        h.write(c.as_bytes());
        h.write(&[0xfe]);
    }
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Response y, predictor x.
    Forward,
    /// Response x, predictor y.
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub direction: Direction,
    /// Candidate witness set under evaluation.
    pub candidate: Vec<String>,
    pub conditioning: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionKind {
    PotentialCause { cause: String, effect: String },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub x: String,
    pub y: String,
    pub pool: Vec<String>,
    pub kind: DecisionKind,
    pub witness_set: Option<Vec<String>>,
    pub evidence: Vec<Evidence>,
    pub config: CriterionConfig,
    pub notes: Vec<String>,
}

impl Decision {
    pub fn is_potential_cause(&self) -> bool {
        matches!(self.kind, DecisionKind::PotentialCause { .. })
    }
}

pub const NRR_NOTE: &str = "residual independence is checked for one regression family (local-linear kernel \
regression with cross-validated bandwidths), not for every possible regression";

/// A test failure during the search, with the evidence gathered up to it.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceError {
    pub error: Error,
    pub evidence: Vec<Evidence>,
}

impl fmt::Display for InferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed tests)", self.error, self.evidence.len())
    }
}

impl std::error::Error for InferenceError {}

impl From<Error> for InferenceError {
    fn from(error: Error) -> Self {
        InferenceError {
            error,
            evidence: Vec::new(),
        }
    }
}

/// Subsets of `0..n` with at most `k` elements, by size then
/// lexicographically.
pub fn candidate_sets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for size in 1..=k.min(n) {
        let mut c: Vec<usize> = (0..size).collect();
        loop {
            out.push(c.clone());
            let Some(i) = (0..size).rev().find(|&i| c[i] < n - size + i) else { break };
            c[i] += 1;
            for j in i + 1..size {
                c[j] = c[j - 1] + 1;
            }
        }
    }
    out
}

fn subsets<'a>(s: &[&'a str]) -> Vec<Vec<&'a str>> {
    (0..1usize << s.len())
        .map(|mask| (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect())
        .collect()
}

fn check_pair(ds: &Dataset, x: &str, y: &str, pool: &[&str], cfg: &CriterionConfig) -> Result<()> {
    cfg.validate()?;
    if x == y {
        return Err(Error::SameNode(x.into()));
    }
    ds.column_index(x)?;
    ds.column_index(y)?;
    for (i, p) in pool.iter().enumerate() {
        ds.column_index(p)?;
        if *p == x || *p == y {
            return Err(Error::Overlap(p.to_string()));
        }
        if pool[..i].contains(p) {
            return Err(Error::InvalidArgument(format!("pool lists `{p}` twice")));
        }
    }
    if pool.len() > cfg.max_pool_size {
        return Err(Error::InvalidArgument(format!(
            "pool has {} columns, max pool size is {}",
            pool.len(),
            cfg.max_pool_size
        )));
    }
    Ok(())
}

/// Searches S ⊆ pool, smallest first, for a forward acceptance of y given
/// x and S that every reverse test over S' ⊆ S rejects.
pub fn infer_potential_cause(
    ds: &Dataset,
    x: &str,
    y: &str,
    pool: &[&str],
    cfg: &CriterionConfig,
) -> std::result::Result<Decision, InferenceError> {
    check_pair(ds, x, y, pool, cfg)?;
    let mut evidence = Vec::new();
    let fail = |error: Error, evidence: &Vec<Evidence>| InferenceError {
        error,
        evidence: evidence.clone(),
    };
    let test = |resp: &str, pred: &str, s: &[&str]| {
        run_test(cfg.method, ds, resp, pred, s, &cfg.test_config(resp, pred, s))
    };
    let names = |s: &[&str]| s.iter().map(|v| v.to_string()).collect::<Vec<_>>();
    let mut witness = None;

    let cands = candidate_sets(pool.len(), cfg.max_witness_size);
    let mut level_start = 0;
    'search: while level_start < cands.len() {
        let size = cands[level_start].len();
        let level_end = cands[level_start..]
            .iter()
            .position(|c| c.len() != size)
            .map_or(cands.len(), |p| level_start + p);
        let sets: Vec<Vec<&str>> = cands[level_start..level_end]
            .iter()
            .map(|c| c.iter().map(|&i| pool[i]).collect())
            .collect();
        level_start = level_end;
        let forward: Vec<Result<Verdict>> = sets.par_iter().map(|s| test(y, x, s)).collect();
        for (s, fv) in sets.iter().zip(forward) {
            let fv = fv.map_err(|e| fail(e, &evidence))?;
            let accepted = fv.independent;
            evidence.push(Evidence {
                direction: Direction::Forward,
                candidate: names(s),
                conditioning: names(s),
                verdict: fv,
            });
            if !accepted {
                continue;
            }
            let subs = subsets(s);
            let reverse: Vec<Result<Verdict>> = subs.par_iter().map(|sp| test(x, y, sp)).collect();
            let mut all_reject = true;
            for (sp, rv) in subs.iter().zip(reverse) {
                let rv = rv.map_err(|e| fail(e, &evidence))?;
                all_reject &= !rv.independent;
                evidence.push(Evidence {
                    direction: Direction::Reverse,
                    candidate: names(s),
                    conditioning: names(sp),
                    verdict: rv,
                });
            }
            if all_reject {
                witness = Some(names(s));
                break 'search;
            }
        }
    }

    let kind = match witness {
        Some(_) => DecisionKind::PotentialCause {
            cause: x.to_string(),
            effect: y.to_string(),
        },
        None => DecisionKind::Inconclusive,
    };
    let notes = match cfg.method {
        Method::Nrr => vec![NRR_NOTE.to_string()],
        _ => Vec::new(),
    };
    Ok(Decision {
        x: x.to_string(),
        y: y.to_string(),
        pool: names(pool),
        kind,
        witness_set: witness,
        evidence,
        config: cfg.clone(),
        notes,
    })
}

/// The four-cell table for (x, y, z) plus the criterion's decision with
/// pool {z}. Seeds match those used by [`infer_potential_cause`].
pub fn pattern_table(ds: &Dataset, x: &str, y: &str, z: &str, cfg: &CriterionConfig) -> Result<PatternRow> {
    check_pair(ds, x, y, &[z], cfg)?;
    let queries = crate::oracle::cell_queries(x, y, Some(z));
    let verdicts: Vec<Verdict> = queries
        .par_iter()
        .map(|(_, resp, pred, s)| run_test(cfg.method, ds, resp, pred, s, &cfg.test_config(resp, pred, s)))
        .collect::<Result<_>>()?;
    let mut cells = [None; 4];
    let mut p = [None; 4];
    for ((i, ..), v) in queries.iter().zip(&verdicts) {
        cells[*i] = Some(Cell::from_independent(v.independent));
        p[*i] = Some(v.p_value);
    }
    Ok(PatternRow::from_cells(cells, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_smallest_first_lexicographic() {
        let c = candidate_sets(4, 2);
        assert_eq!(c.len(), 1 + 4 + 6);
        assert_eq!(c[0], Vec::<usize>::new());
        assert_eq!(c[1..5], [vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(c[5], vec![0, 1]);
        assert_eq!(c[10], vec![2, 3]);
        assert_eq!(candidate_sets(2, 3).len(), 4);
    }

    #[test]
    fn subsets_cover_power_set() {
        let s = subsets(&["a", "b", "c"]);
        assert_eq!(s.len(), 8);
        assert!(s.contains(&vec![]));
        assert!(s.contains(&vec!["a", "b", "c"]));
    }

    #[test]
    fn seeds_ignore_conditioning_order() {
        let a = derive_seed(3, "Y", "X", &["Z", "W"]);
        assert_eq!(a, derive_seed(3, "Y", "X", &["W", "Z"]));
        assert_ne!(a, derive_seed(3, "X", "Y", &["W", "Z"]));
        assert_ne!(a, derive_seed(4, "Y", "X", &["W", "Z"]));
    }

    #[test]
    fn config_checks() {
        let ds = Dataset::from_columns(&[("X", &[1.0, 2.0]), ("Y", &[2.0, 1.0]), ("Z", &[0.0, 1.0])]).unwrap();
        let cfg = CriterionConfig::default();
        let bad = CriterionConfig {
            max_pool_size: 2,
            ..cfg.clone()
        };
        assert!(matches!(infer_potential_cause(&ds, "X", "Y", &["Z"], &bad), Err(e) if matches!(e.error, Error::InvalidArgument(_))));
        assert!(matches!(infer_potential_cause(&ds, "X", "X", &[], &cfg), Err(e) if matches!(e.error, Error::SameNode(_))));
        assert!(matches!(infer_potential_cause(&ds, "X", "Y", &["Q"], &cfg), Err(e) if matches!(e.error, Error::UnknownColumn(_))));
        assert!(matches!(infer_potential_cause(&ds, "X", "Y", &["X"], &cfg), Err(e) if matches!(e.error, Error::Overlap(_))));
    }
}
