use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dataset::{Column, Dataset};
use super::expr::{Expr, NoiseId};
use super::noise::NoiseSpec;
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Node, NodeId};

/// Rows per RNG substream; fixed so output does not depend on thread count.
pub const SAMPLE_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ScmModel {
    graph: CausalGraph,
    equations: Vec<Expr>,
    noises: Vec<NoiseSpec>,
}

impl ScmModel {
    /// `equations[i]` belongs to graph node `i`.
    pub fn new(graph: CausalGraph, equations: Vec<Expr>, noises: Vec<NoiseSpec>) -> Result<Self> {
        if equations.len() != graph.len() {
            return Err(Error::InvalidModel(format!(
                "{} equations for {} nodes",
                equations.len(),
                graph.len()
            )));
        }
        let mut names: HashMap<&str, ()> = graph.nodes().iter().map(|n| (n.name.as_str(), ())).collect();
        for ns in &noises {
            if names.insert(ns.name.as_str(), ()).is_some() {
                return Err(Error::InvalidModel(format!("name `{}` declared twice", ns.name)));
            }
        }
        let mut owner: Vec<Option<NodeId>> = vec![None; noises.len()];
        for v in graph.ids() {
            let eq = &equations[v.0];
            let name = graph.name(v);
            if eq.var_refs().iter().any(|r| r.0 >= graph.len())
                || eq.noise_refs().iter().any(|r| r.0 >= noises.len())
            {
                return Err(Error::InvalidModel(format!("equation of `{name}` has a dangling reference")));
            }
            let refs: BTreeSet<NodeId> = eq.var_refs();
            let parents: BTreeSet<NodeId> = graph.parents(v).iter().copied().collect();
            if refs != parents {
                return Err(Error::InvalidModel(format!(
                    "equation of `{name}` references {:?} but its parents are {:?}",
                    refs.iter().map(|r| graph.name(*r)).collect::<Vec<_>>(),
                    parents.iter().map(|r| graph.name(*r)).collect::<Vec<_>>()
                )));
            }
            let ns = eq.noise_refs();
            if ns.len() > 1 {
                return Err(Error::InvalidModel(format!("equation of `{name}` uses more than one noise term")));
            }
            for n in ns {
                if let Some(o) = owner[n.0] {
                    return Err(Error::InvalidModel(format!(
                        "noise `{}` is shared by `{}` and `{name}`",
                        noises[n.0].name,
                        graph.name(o)
                    )));
                }
                owner[n.0] = Some(v);
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidModel(format!("noise `{}` is never used", noises[i].name)));
        }
        Ok(ScmModel {
            graph,
            equations,
            noises,
        })
    }

    /// Builds the graph from the equations' variable references.
    pub fn from_equations(nodes: Vec<Node>, equations: Vec<Expr>, noises: Vec<NoiseSpec>) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, eq) in equations.iter().enumerate() {
            for p in eq.var_refs() {
                let pn = nodes.get(p.0).ok_or_else(|| Error::UnknownNode(format!("#{}", p.0)))?;
                let cn = nodes.get(i).ok_or_else(|| Error::UnknownNode(format!("#{i}")))?;
                edges.push((pn.name.clone(), cn.name.clone()));
            }
        }
        let graph = CausalGraph::new(nodes, &edges)?;
        Self::new(graph, equations, noises)
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn equation(&self, v: NodeId) -> &Expr {
        &self.equations[v.0]
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn noises(&self) -> &[NoiseSpec] {
        &self.noises
    }

    pub fn noise_id(&self, name: &str) -> Option<NoiseId> {
        self.noises.iter().position(|n| n.name == name).map(NoiseId)
    }

    /// The private noise of `v`, if its equation has one.
    pub fn private_noise(&self, v: NodeId) -> Option<NoiseId> {
        self.equations[v.0].noise_refs().into_iter().next()
    }

    pub fn render(&self, e: &Expr) -> String {
        let var = |v: NodeId| self.graph.name(v).to_string();
        let noise = |n: NoiseId| self.noises[n.0].name.clone();
        e.render(&var, &noise).to_string()
    }

    /// Forward sampling of `n` rows, all nodes included.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        let k = self.graph.len();
        let blocks = n.div_ceil(SAMPLE_BLOCK);
        let parts: Vec<Result<Vec<f64>>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let start = b * SAMPLE_BLOCK;
                let rows = SAMPLE_BLOCK.min(n - start);
                let mut out = vec![0.0; rows * k];
                let mut eps = vec![0.0; self.noises.len()];
                for r in 0..rows {
                    for (e, spec) in eps.iter_mut().zip(&self.noises) {
                        *e = spec.distribution.sample(&mut rng);
                    }
                    let row = &mut out[r * k..(r + 1) * k];
                    for &v in self.graph.topological_order() {
                        let val = self.equations[v.0].eval(row, &eps);
                        if !val.is_finite() {
                            return Err(Error::NonFinite {
                                node: self.graph.name(v).to_string(),
                                row: start + r,
                            });
                        }
                        row[v.0] = val;
                    }
                }
                Ok(out)
            })
            .collect();
        let mut data = Vec::with_capacity(n * k);
        for p in parts {
            data.extend(p?);
        }
        let columns = self
            .graph
            .nodes()
            .iter()
            .map(|nd| Column {
                name: nd.name.clone(),
                observed: nd.observed,
            })
            .collect();
        Dataset::new(columns, data, Some(seed))
    }
}
