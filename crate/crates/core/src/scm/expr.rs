use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryKind {
    Tanh,
    Exp,
    Square,
    Cube,
    Abs,
    Identity,
}

impl UnaryKind {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            UnaryKind::Tanh => v.tanh(),
            UnaryKind::Exp => v.exp(),
            UnaryKind::Square => v * v,
            UnaryKind::Cube => v * v * v,
            UnaryKind::Abs => v.abs(),
            UnaryKind::Identity => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryKind::Tanh => "tanh",
            UnaryKind::Exp => "exp",
            UnaryKind::Square => "square",
            UnaryKind::Cube => "cube",
            UnaryKind::Abs => "abs",
            UnaryKind::Identity => "id",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "tanh" => UnaryKind::Tanh,
            "exp" => UnaryKind::Exp,
            "square" => UnaryKind::Square,
            "cube" => UnaryKind::Cube,
            "abs" => UnaryKind::Abs,
            "id" | "identity" => UnaryKind::Identity,
            _ => return None,
        })
    }
}

/// Noise terms are indexed by position in the model's noise list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoiseId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Constant(f64),
    Var(NodeId),
    Noise(NoiseId),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Unary(UnaryKind, Box<Expr>),
    Scaled(f64, Box<Expr>),
}

impl Expr {
    pub fn var(v: NodeId) -> Expr {
        Expr::Var(v)
    }

    pub fn scaled(c: f64, e: Expr) -> Expr {
        Expr::Scaled(c, Box::new(e))
    }

    pub fn unary(k: UnaryKind, e: Expr) -> Expr {
        Expr::Unary(k, Box::new(e))
    }

    pub fn eval(&self, vars: &[f64], noises: &[f64]) -> f64 {
        match self {
            Expr::Constant(c) => *c,
            Expr::Var(v) => vars[v.0],
            Expr::Noise(e) => noises[e.0],
            Expr::Sum(xs) => xs.iter().map(|x| x.eval(vars, noises)).sum(),
            Expr::Product(xs) => xs.iter().map(|x| x.eval(vars, noises)).product(),
            Expr::Unary(k, x) => k.apply(x.eval(vars, noises)),
            Expr::Scaled(c, x) => c * x.eval(vars, noises),
        }
    }

    pub fn var_refs(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(*v);
            }
        });
        out
    }

    pub fn noise_refs(&self) -> BTreeSet<NoiseId> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Noise(n) = e {
                out.insert(*n);
            }
        });
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Constant(_) | Expr::Var(_) | Expr::Noise(_) => 1,
            Expr::Sum(xs) | Expr::Product(xs) => 1 + xs.iter().map(Expr::depth).max().unwrap_or(0),
            Expr::Unary(_, x) | Expr::Scaled(_, x) => 1 + x.depth(),
        }
    }

    fn walk<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self {
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().for_each(|x| x.walk(f)),
            Expr::Unary(_, x) | Expr::Scaled(_, x) => x.walk(f),
            _ => {}
        }
    }

    /// Prefix rendering; `var` and `noise` map ids to names.
    pub fn render<'a>(
        &'a self,
        var: &'a dyn Fn(NodeId) -> String,
        noise: &'a dyn Fn(NoiseId) -> String,
    ) -> Rendered<'a> {
        Rendered {
            expr: self,
            var,
            noise,
        }
    }
}

pub struct Rendered<'a> {
    expr: &'a Expr,
    var: &'a dyn Fn(NodeId) -> String,
    noise: &'a dyn Fn(NoiseId) -> String,
}

impl fmt::Display for Rendered<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &'_ Expr| Rendered {
            expr: e,
            var: self.var,
            noise: self.noise,
        }
        .to_string();
        match self.expr {
            Expr::Constant(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{}", (self.var)(*v)),
            Expr::Noise(n) => write!(f, "{}", (self.noise)(*n)),
            Expr::Sum(xs) | Expr::Product(xs) => {
                let op = if matches!(self.expr, Expr::Sum(_)) { "+" } else { "*" };
                write!(f, "({op}")?;
                for x in xs {
                    write!(f, " {}", sub(x))?;
                }
                write!(f, ")")
            }
            Expr::Unary(k, x) => write!(f, "({} {})", k.name(), sub(x)),
            Expr::Scaled(c, x) => write!(f, "(scale {c:?} {})", sub(x)),
        }
    }
}
