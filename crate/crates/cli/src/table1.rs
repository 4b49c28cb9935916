//! Reproduction of the four-example independence table.

use std::fmt::Write;

use canoise_core::indep_tests::Method;
use canoise_core::inference::{pattern_table, CriterionConfig};
use canoise_core::oracle::{majority_pattern, Cell, PatternRow, YesNo, CELL_LABELS};
use canoise_core::scm::presets::{preset, PresetName};
use canoise_core::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Config {
    pub n: usize,
    pub seeds: usize,
    pub level: f64,
    pub n_perm: usize,
    pub method: Method,
    pub base_seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            n: 20000,
            seeds: 10,
            level: 0.01,
            n_perm: 199,
            method: Method::Cv,
            base_seed: 0,
        }
    }
}

impl Table1Config {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.base_seed + k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub preset: String,
    pub expected_cells: [Cell; 4],
    pub expected_decision: YesNo,
    pub per_seed: Vec<PatternRow>,
    pub majority: PatternRow,
    /// Seeds agreeing with the expected cell value.
    pub expected_agreement: [usize; 4],
    /// Seeds whose own decision equals the expected one.
    pub decision_agreement: usize,
    pub cells_match: [bool; 4],
    pub decision_match: bool,
    /// Fewer than 90% of seeds agree with the majority.
    pub unstable: [bool; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Result {
    pub config: Table1Config,
    pub rows: Vec<Table1Row>,
    pub cells_matched: usize,
    pub decisions_matched: usize,
    pub all_match: bool,
}

/// Runs every figure-1 preset over the configured seeds; data and test
/// seeds for replicate k are both `base_seed + k`.
pub fn reproduce_table1(cfg: &Table1Config) -> Result<Table1Result> {
    let jobs: Vec<(PresetName, u64)> = PresetName::FIG1
        .iter()
        .flat_map(|p| cfg.seed_list().into_iter().map(move |s| (*p, s)))
        .collect();
    let rows: Vec<PatternRow> = jobs
        .par_iter()
        .map(|(name, seed)| {
            let p = preset(*name);
            let ds = p.model().sample(cfg.n, *seed)?;
            let crit = CriterionConfig {
                method: cfg.method,
                level: cfg.level,
                n_perm: cfg.n_perm,
                seed: *seed,
                ..CriterionConfig::default()
            };
            let z = p.z.as_deref().expect("figure presets have a third variable");
            pattern_table(&ds, &p.x, &p.y, z, &crit)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (k, name) in PresetName::FIG1.iter().enumerate() {
        let p = preset(*name);
        let expected_cells = p.expected.cells.map(|c| c.expect("figure presets claim every cell"));
        let expected_decision = p.expected.decision.expect("figure presets claim a decision");
        let per_seed = rows[k * cfg.seeds..(k + 1) * cfg.seeds].to_vec();
        let (majority, agree) = majority_pattern(&per_seed);
        let mut expected_agreement = [0; 4];
        for (i, e) in expected_cells.iter().enumerate() {
            expected_agreement[i] = per_seed.iter().filter(|r| r.cells[i] == Some(*e)).count();
        }
        let cells_match: [bool; 4] = std::array::from_fn(|i| majority.cells[i] == Some(expected_cells[i]));
        let unstable = agree.map(|a| 10 * a < 9 * cfg.seeds);
        out.push(Table1Row {
            preset: name.to_string(),
            expected_cells,
            expected_decision,
            decision_agreement: per_seed.iter().filter(|r| r.decision == expected_decision).count(),
            decision_match: majority.decision == expected_decision,
            per_seed,
            majority,
            expected_agreement,
            cells_match,
            unstable,
        });
    }
    let cells_matched = out.iter().map(|r| r.cells_match.iter().filter(|m| **m).count()).sum();
    let decisions_matched = out.iter().filter(|r| r.decision_match).count();
    Ok(Table1Result {
        config: cfg.clone(),
        all_match: cells_matched == 16 && decisions_matched == 4,
        rows: out,
        cells_matched,
        decisions_matched,
    })
}

fn sym(c: Option<Cell>) -> &'static str {
    match c {
        Some(Cell::Indep) => "indep",
        Some(Cell::Dep) => "dep",
        None => "-",
    }
}

/// Side-by-side text rendering: observed (agreement) versus expected.
pub fn render(r: &Table1Result) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "method {:?}, n = {}, {} seeds, level {}",
        r.config.method, r.config.n, r.config.seeds, r.config.level
    );
    let _ = write!(s, "{:<7}", "preset");
    for l in CELL_LABELS {
        let _ = write!(s, " {:<20}", l);
    }
    let _ = writeln!(s, " decision");
    for row in &r.rows {
        let _ = write!(s, "{:<7}", row.preset);
        for i in 0..4 {
            let mark = if !row.cells_match[i] {
                " !"
            } else if row.unstable[i] {
                " ?"
            } else {
                ""
            };
            let cell = format!(
                "{} {}/{} ({}){}",
                sym(row.majority.cells[i]),
                row.expected_agreement[i],
                r.config.seeds,
                sym(Some(row.expected_cells[i])),
                mark
            );
            let _ = write!(s, " {:<20}", cell);
        }
        let _ = writeln!(
            s,
            " {:?} ({:?}){}",
            row.majority.decision,
            row.expected_decision,
            if row.decision_match { "" } else { " !" }
        );
    }
    let _ = writeln!(
        s,
        "cells matched {}/16, decisions matched {}/4 ({} = mismatch, ? = unstable)",
        r.cells_matched, r.decisions_matched, "!"
    );
    s
}
