//! Classification of the top-level summands of one equation relative to a
//! reference parent.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::expr::{Expr, NoiseId};
use super::model::ScmModel;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// A summand that is linear in one variable, possibly with a coefficient
/// that is a function of other (observed) variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub var: NodeId,
    pub coef_args: BTreeSet<NodeId>,
    pub term: Expr,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub terms: Vec<Expr>,
    pub args: BTreeSet<NodeId>,
}

impl Bucket {
    fn push(&mut self, term: Expr) {
        self.args.extend(term.var_refs());
        self.terms.push(term);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermTaxonomy {
    pub y: NodeId,
    pub x: NodeId,
    pub f11: Bucket,
    pub f12: Bucket,
    pub linear_obs_funccoef: Vec<LinearTerm>,
    pub linear_obs_const: Vec<LinearTerm>,
    pub linear_hid_funccoef: Vec<LinearTerm>,
    pub linear_hid_const: Vec<LinearTerm>,
    pub noise_mixing: Bucket,
    pub pure_noise: Option<Expr>,
    pub constants: Vec<Expr>,
    observed: Vec<bool>,
}

/// Flattens nested sums, pushing scale factors into the summands.
fn flatten(e: &Expr, scale: f64, out: &mut Vec<Expr>) {
    match e {
        Expr::Sum(xs) => xs.iter().for_each(|x| flatten(x, scale, out)),
        Expr::Scaled(c, inner) => flatten(inner, scale * c, out),
        other => out.push(if scale == 1.0 {
            other.clone()
        } else {
            Expr::Scaled(scale, Box::new(other.clone()))
        }),
    }
}

fn strip_scale(e: &Expr) -> &Expr {
    match e {
        Expr::Scaled(_, inner) => strip_scale(inner),
        other => other,
    }
}

pub fn decompose(model: &ScmModel, y: NodeId, x: NodeId) -> Result<TermTaxonomy> {
    let g = model.graph();
    if y.0 >= g.len() || x.0 >= g.len() {
        return Err(Error::UnknownNode(format!("#{}", y.0.max(x.0))));
    }
    if !g.parents(y).contains(&x) {
        return Err(Error::NotAParent {
            x: g.name(x).to_string(),
            y: g.name(y).to_string(),
        });
    }
    let observed: Vec<bool> = g.ids().map(|v| g.is_observed(v)).collect();
    let own_noise: Option<NoiseId> = model.private_noise(y);
    let mut t = TermTaxonomy {
        y,
        x,
        f11: Bucket::default(),
        f12: Bucket::default(),
        linear_obs_funccoef: Vec::new(),
        linear_obs_const: Vec::new(),
        linear_hid_funccoef: Vec::new(),
        linear_hid_const: Vec::new(),
        noise_mixing: Bucket::default(),
        pure_noise: None,
        constants: Vec::new(),
        observed: observed.clone(),
    };
    let mut terms = Vec::new();
    flatten(model.equation(y), 1.0, &mut terms);
    for term in terms {
        let core = strip_scale(&term);
        let noises = term.noise_refs();
        let vars = term.var_refs();
        if own_noise.is_some_and(|n| noises.contains(&n)) {
            if matches!(core, Expr::Noise(_)) && t.pure_noise.is_none() {
                t.pure_noise = Some(term);
            } else {
                t.noise_mixing.push(term);
            }
            continue;
        }
        if vars.is_empty() && noises.is_empty() {
            t.constants.push(term);
            continue;
        }
        if vars.contains(&x) {
            t.f11.push(term);
            continue;
        }
        match linear_form(core, &observed) {
            Some((var, coef_args)) => {
                let lt = LinearTerm {
                    var,
                    coef_args: coef_args.clone(),
                    term,
                };
                match (observed[var.0], coef_args.is_empty()) {
                    (true, true) => t.linear_obs_const.push(lt),
                    (true, false) => t.linear_obs_funccoef.push(lt),
                    (false, true) => t.linear_hid_const.push(lt),
                    (false, false) => t.linear_hid_funccoef.push(lt),
                }
            }
            None => t.f12.push(term),
        }
    }
    Ok(t)
}

/// `Var(v)`, or a product with exactly one bare `Var(v)` factor whose other
/// factors depend on observed variables only (and not on `v`).
fn linear_form(core: &Expr, observed: &[bool]) -> Option<(NodeId, BTreeSet<NodeId>)> {
    match core {
        Expr::Var(v) => Some((*v, BTreeSet::new())),
        Expr::Product(fs) => {
            for (i, f) in fs.iter().enumerate() {
                let Expr::Var(v) = strip_scale(f) else { continue };
                let mut args = BTreeSet::new();
                let mut ok = true;
                for (j, g) in fs.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let r = g.var_refs();
                    if !g.noise_refs().is_empty() || r.contains(v) || r.iter().any(|a| !observed[a.0]) {
                        ok = false;
                        break;
                    }
                    args.extend(r);
                }
                if ok {
                    return Some((*v, args));
                }
            }
            None
        }
        _ => None,
    }
}

fn split(args: &BTreeSet<NodeId>, observed: &[bool], want: bool, skip: Option<NodeId>) -> BTreeSet<NodeId> {
    args.iter()
        .copied()
        .filter(|a| observed[a.0] == want && Some(*a) != skip)
        .collect()
}

impl TermTaxonomy {
    /// Observed arguments of f11 other than x.
    pub fn v11(&self) -> BTreeSet<NodeId> {
        split(&self.f11.args, &self.observed, true, Some(self.x))
    }

    /// Hidden arguments of f11 other than x.
    pub fn u11(&self) -> BTreeSet<NodeId> {
        split(&self.f11.args, &self.observed, false, Some(self.x))
    }

    pub fn v12(&self) -> BTreeSet<NodeId> {
        split(&self.f12.args, &self.observed, true, None)
    }

    pub fn u12(&self) -> BTreeSet<NodeId> {
        split(&self.f12.args, &self.observed, false, None)
    }

    pub fn v2(&self) -> BTreeSet<NodeId> {
        split(&self.noise_mixing.args, &self.observed, true, Some(self.x))
    }

    pub fn u2(&self) -> BTreeSet<NodeId> {
        split(&self.noise_mixing.args, &self.observed, false, None)
    }

    pub fn v13(&self) -> BTreeSet<NodeId> {
        self.linear_obs_funccoef.iter().map(|t| t.var).collect()
    }

    pub fn v13_coef_args(&self) -> BTreeSet<NodeId> {
        self.linear_obs_funccoef.iter().flat_map(|t| t.coef_args.iter().copied()).collect()
    }

    pub fn u14(&self) -> BTreeSet<NodeId> {
        self.linear_hid_funccoef.iter().map(|t| t.var).collect()
    }

    pub fn v14_coef_args(&self) -> BTreeSet<NodeId> {
        self.linear_hid_funccoef.iter().flat_map(|t| t.coef_args.iter().copied()).collect()
    }

    pub fn v3(&self) -> BTreeSet<NodeId> {
        self.linear_obs_const.iter().map(|t| t.var).collect()
    }

    pub fn u3(&self) -> BTreeSet<NodeId> {
        self.linear_hid_const.iter().map(|t| t.var).collect()
    }

    pub fn x_in_noise_mixing(&self) -> bool {
        self.noise_mixing.args.contains(&self.x)
    }

    /// Additive-noise form in x with no further conditioning needed.
    pub fn is_additive_noise(&self) -> bool {
        self.noise_mixing.terms.is_empty() && self.pure_noise.is_some()
    }

    /// Hidden parents outside U11.
    pub fn hidden_outside_u11(&self) -> BTreeSet<NodeId> {
        let mut out = self.u12();
        out.extend(self.u2());
        out.extend(self.u14());
        out.extend(self.u3());
        let u11 = self.u11();
        out.retain(|u| !u11.contains(u));
        out
    }

    /// Every summand, bucket by bucket.
    pub fn terms(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = Vec::new();
        out.extend(&self.f11.terms);
        out.extend(&self.f12.terms);
        for b in [
            &self.linear_obs_funccoef,
            &self.linear_obs_const,
            &self.linear_hid_funccoef,
            &self.linear_hid_const,
        ] {
            out.extend(b.iter().map(|t| &t.term));
        }
        out.extend(&self.noise_mixing.terms);
        out.extend(self.pure_noise.iter());
        out.extend(&self.constants);
        out
    }

    pub fn reassemble(&self) -> Expr {
        Expr::Sum(self.terms().into_iter().cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;
    use crate::scm::expr::UnaryKind;
    use crate::scm::noise::NoiseSpec;

    fn nodes(spec: &[(&str, bool)]) -> Vec<Node> {
        spec.iter()
            .map(|(n, o)| Node {
                name: n.to_string(),
                observed: *o,
            })
            .collect()
    }

    #[test]
    fn additive_noise_form() {
        // X = e0, Y = tanh(X) + e1
        let m = ScmModel::from_equations(
            nodes(&[("X", true), ("Y", true)]),
            vec![
                Expr::Noise(NoiseId(0)),
                Expr::Sum(vec![Expr::unary(UnaryKind::Tanh, Expr::Var(NodeId(0))), Expr::Noise(NoiseId(1))]),
            ],
            vec![NoiseSpec::gaussian("ex", 1.0), NoiseSpec::gaussian("ey", 1.0)],
        )
        .unwrap();
        let t = decompose(&m, NodeId(1), NodeId(0)).unwrap();
        assert_eq!(t.f11.args, BTreeSet::from([NodeId(0)]));
        assert!(t.pure_noise.is_some() && t.is_additive_noise());
        assert!(t.f12.terms.is_empty() && t.noise_mixing.terms.is_empty());
        assert!(t.linear_obs_const.is_empty() && t.linear_hid_funccoef.is_empty());
    }

    #[test]
    fn mixed_model_buckets() {
        // Y = 1.5 X + 0.8 Z + E*V + 2 (E*Z) + e_y, with V, E hidden.
        let (x, z, v, e, y) = (NodeId(0), NodeId(1), NodeId(2), NodeId(3), NodeId(4));
        let m = ScmModel::from_equations(
            nodes(&[("X", true), ("Z", true), ("V", false), ("E", false), ("Y", true)]),
            vec![
                Expr::Noise(NoiseId(0)),
                Expr::Noise(NoiseId(1)),
                Expr::Noise(NoiseId(2)),
                Expr::Noise(NoiseId(3)),
                Expr::Sum(vec![
                    Expr::scaled(1.5, Expr::Var(x)),
                    Expr::scaled(0.8, Expr::Var(z)),
                    Expr::Product(vec![Expr::Var(e), Expr::Var(v)]),
                    Expr::scaled(2.0, Expr::Product(vec![Expr::Var(e), Expr::Var(z)])),
                    Expr::Noise(NoiseId(4)),
                ]),
            ],
            (0..5).map(|i| NoiseSpec::gaussian(&format!("n{i}"), 1.0)).collect(),
        )
        .unwrap();
        let t = decompose(&m, y, x).unwrap();
        assert_eq!(t.f11.args, BTreeSet::from([x]));
        assert_eq!(t.v3(), BTreeSet::from([z]));
        assert_eq!(t.u12(), BTreeSet::from([v, e]));
        assert_eq!(t.u14(), BTreeSet::from([e]));
        assert_eq!(t.v14_coef_args(), BTreeSet::from([z]));
        assert!(t.u11().is_empty() && !t.x_in_noise_mixing());
        assert_eq!(t.hidden_outside_u11(), BTreeSet::from([v, e]));
    }

    #[test]
    fn noise_modulated_by_x() {
        // Y = tanh(X * e_y)
        let m = ScmModel::from_equations(
            nodes(&[("X", true), ("Y", true)]),
            vec![
                Expr::Noise(NoiseId(0)),
                Expr::unary(UnaryKind::Tanh, Expr::Product(vec![Expr::Var(NodeId(0)), Expr::Noise(NoiseId(1))])),
            ],
            vec![NoiseSpec::gaussian("ex", 1.0), NoiseSpec::gaussian("ey", 1.0)],
        )
        .unwrap();
        let t = decompose(&m, NodeId(1), NodeId(0)).unwrap();
        assert!(t.x_in_noise_mixing());
        assert!(!t.is_additive_noise());
        assert!(t.f11.terms.is_empty());
    }

    #[test]
    fn not_a_parent_errors() {
        let m = ScmModel::from_equations(
            nodes(&[("X", true), ("Y", true)]),
            vec![Expr::Noise(NoiseId(0)), Expr::Noise(NoiseId(1))],
            vec![NoiseSpec::gaussian("ex", 1.0), NoiseSpec::gaussian("ey", 1.0)],
        )
        .unwrap();
        assert!(matches!(decompose(&m, NodeId(1), NodeId(0)), Err(Error::NotAParent { .. })));
    }
}
