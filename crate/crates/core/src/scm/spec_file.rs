//! Line-oriented model description.
//!
//! ```text
//! # comment
//! description: two-node additive noise pair
//! seed: 7
//! node X observed
//! node H hidden
//! noise ex gaussian 0 1
//! noise ey uniform -1 1
//! edge X -> Y            (optional; must agree with the equations)
//! X = ex
//! Y = (+ (cube X) X ey)
//! ```
//!
//! Expressions are prefix forms: numbers, node or noise names, and
//! `(+ ...)`, `(* ...)`, `(- a)`, `(- a b)`, `(scale c e)`, and the unary
//! functions `tanh exp square cube abs id`. An equation may continue on
//! following lines while parentheses are open.

use std::collections::HashMap;

use super::expr::{Expr, NoiseId, UnaryKind};
use super::model::ScmModel;
use super::noise::{Distribution, NoiseSpec};
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Node, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpecFile {
    pub description: Option<String>,
    pub seed: Option<u64>,
    /// Optional default roles for commands that need a pair and a pool.
    pub x: Option<String>,
    pub y: Option<String>,
    pub pool: Vec<String>,
    pub model: ScmModel,
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

/// (token, line, column)
fn tokenize(text: &str, line: usize, col0: usize) -> Vec<(Tok, usize, usize)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        let c = col0 + i;
        match ch {
            '(' | ')' | ' ' | '\t' => {
                if !cur.is_empty() {
                    out.push((Tok::Atom(std::mem::take(&mut cur)), line, start));
                }
                if ch == '(' {
                    out.push((Tok::Open, line, c));
                } else if ch == ')' {
                    out.push((Tok::Close, line, c));
                }
            }
            _ => {
                if cur.is_empty() {
                    start = c;
                }
                cur.push(ch);
            }
        }
    }
    if !cur.is_empty() {
        out.push((Tok::Atom(cur), line, start));
    }
    out
}

struct ExprParser<'a> {
    toks: &'a [(Tok, usize, usize)],
    pos: usize,
    nodes: &'a HashMap<String, NodeId>,
    noises: &'a HashMap<String, NoiseId>,
    end: (usize, usize),
}

impl ExprParser<'_> {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.1, t.2)).unwrap_or(self.end)
    }

    fn parse(&mut self) -> Result<Expr> {
        let (line, col) = self.here();
        let Some((tok, _, _)) = self.toks.get(self.pos) else {
            return Err(perr(line, col, "unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Close => Err(perr(line, col, "unexpected `)`")),
            Tok::Atom(a) => self.atom(a, line, col),
            Tok::Open => {
                let (ol, oc) = self.here();
                let op = match self.toks.get(self.pos) {
                    Some((Tok::Atom(a), _, _)) => a.clone(),
                    _ => return Err(perr(ol, oc, "expected an operator after `(`")),
                };
                self.pos += 1;
                let mut args = Vec::new();
                loop {
                    match self.toks.get(self.pos) {
                        Some((Tok::Close, _, _)) => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => args.push(self.parse()?),
                        None => {
                            let (l, c) = self.end;
                            return Err(perr(l, c, "missing `)`"));
                        }
                    }
                }
                build(&op, args, ol, oc)
            }
        }
    }

    fn atom(&self, a: &str, line: usize, col: usize) -> Result<Expr> {
        if let Some(v) = self.nodes.get(a) {
            return Ok(Expr::Var(*v));
        }
        if let Some(n) = self.noises.get(a) {
            return Ok(Expr::Noise(*n));
        }
        match a.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Constant(v)),
            _ => Err(perr(line, col, format!("unknown name `{a}`"))),
        }
    }
}

fn build(op: &str, mut args: Vec<Expr>, line: usize, col: usize) -> Result<Expr> {
    let arity = |lo: usize, hi: usize, args: &Vec<Expr>| {
        if args.len() < lo || args.len() > hi {
            Err(perr(line, col, format!("`{op}` takes {lo}..={hi} arguments, got {}", args.len())))
        } else {
            Ok(())
        }
    };
    match op {
        "+" => {
            arity(1, usize::MAX, &args)?;
            Ok(Expr::Sum(args))
        }
        "*" => {
            arity(1, usize::MAX, &args)?;
            let mut coef = 1.0;
            let mut rest = Vec::new();
            for a in args {
                match a {
                    Expr::Constant(c) => coef *= c,
                    other => rest.push(other),
                }
            }
            let body = match rest.len() {
                0 => return Ok(Expr::Constant(coef)),
                1 => rest.pop().unwrap(),
                _ => Expr::Product(rest),
            };
            Ok(if coef == 1.0 { body } else { Expr::scaled(coef, body) })
        }
        "-" => {
            arity(1, 2, &args)?;
            if args.len() == 1 {
                Ok(Expr::scaled(-1.0, args.pop().unwrap()))
            } else {
                let b = args.pop().unwrap();
                let a = args.pop().unwrap();
                Ok(Expr::Sum(vec![a, Expr::scaled(-1.0, b)]))
            }
        }
        "scale" => {
            arity(2, 2, &args)?;
            let e = args.pop().unwrap();
            match args.pop().unwrap() {
                Expr::Constant(c) => Ok(Expr::scaled(c, e)),
                _ => Err(perr(line, col, "`scale` needs a numeric coefficient")),
            }
        }
        other => match UnaryKind::from_name(other) {
            Some(k) => {
                arity(1, 1, &args)?;
                Ok(Expr::unary(k, args.pop().unwrap()))
            }
            None => Err(perr(line, col, format!("unknown operator `{other}`"))),
        },
    }
}

fn parse_num(s: &str, line: usize, col: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| perr(line, col, format!("expected a number, got `{s}`")))
}

impl ModelSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut description = None;
        let mut seed = None;
        let (mut x, mut y, mut pool) = (None, None, Vec::new());
        let mut nodes: Vec<Node> = Vec::new();
        let mut noises: Vec<NoiseSpec> = Vec::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        // (node name, line, col, tokens)
        let mut eqs: Vec<(String, usize, usize, Vec<(Tok, usize, usize)>)> = Vec::new();
        let mut open_depth: i64 = 0;

        for (li, raw) in text.lines().enumerate() {
            let line = li + 1;
            let body = raw.split('#').next().unwrap_or("");
            if open_depth > 0 {
                let toks = tokenize(body, line, 1);
                open_depth += depth_delta(&toks);
                eqs.last_mut().unwrap().3.extend(toks);
                continue;
            }
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = body.len() - body.trim_start().len() + 1;
            let words: Vec<&str> = trimmed.split_whitespace().collect();
            let col_of = |w: usize| -> usize {
                // Column of the w-th whitespace-separated word.
                let mut c = 0;
                let mut seen = 0;
                let bytes = trimmed.as_bytes();
                while c < bytes.len() {
                    while c < bytes.len() && bytes[c].is_ascii_whitespace() {
                        c += 1;
                    }
                    if seen == w {
                        return indent + c;
                    }
                    while c < bytes.len() && !bytes[c].is_ascii_whitespace() {
                        c += 1;
                    }
                    seen += 1;
                }
                indent + trimmed.len()
            };
            if let Some((key, val)) = trimmed.split_once(':') {
                if !key.contains(' ') && !key.contains('(') && !key.contains('=') {
                    let val = val.trim();
                    match key {
                        "description" => description = Some(val.to_string()),
                        "seed" => {
                            seed = Some(val.parse().map_err(|_| perr(line, col_of(1), "seed must be an unsigned integer"))?)
                        }
                        "x" => x = Some(val.to_string()),
                        "y" => y = Some(val.to_string()),
                        "pool" => pool = val.split_whitespace().map(str::to_string).collect(),
                        other => return Err(perr(line, indent, format!("unknown metadata key `{other}`"))),
                    }
                    continue;
                }
            }
            match words[0] {
                "node" => {
                    if words.len() != 3 {
                        return Err(perr(line, indent, "expected `node <name> observed|hidden`"));
                    }
                    let observed = match words[2] {
                        "observed" => true,
                        "hidden" => false,
                        _ => return Err(perr(line, col_of(2), "expected `observed` or `hidden`")),
                    };
                    check_ident(words[1], line, col_of(1))?;
                    nodes.push(Node {
                        name: words[1].to_string(),
                        observed,
                    });
                }
                "noise" => {
                    if words.len() != 5 {
                        return Err(perr(line, indent, "expected `noise <name> <gaussian|uniform|laplace> <a> <b>`"));
                    }
                    check_ident(words[1], line, col_of(1))?;
                    let a = parse_num(words[3], line, col_of(3))?;
                    let b = parse_num(words[4], line, col_of(4))?;
                    let dist = match words[2] {
                        "gaussian" | "normal" => Distribution::Gaussian { mean: a, sd: b },
                        "uniform" => Distribution::Uniform { lo: a, hi: b },
                        "laplace" => Distribution::Laplace { loc: a, scale: b },
                        other => return Err(perr(line, col_of(2), format!("unknown distribution `{other}`"))),
                    };
                    noises.push(NoiseSpec::new(words[1], dist).map_err(|e| perr(line, col_of(3), e.to_string()))?);
                }
                "edge" => {
                    let ok = words.len() == 4 && words[2] == "->";
                    if !ok {
                        return Err(perr(line, indent, "expected `edge <parent> -> <child>`"));
                    }
                    edges.push((words[1].to_string(), words[3].to_string()));
                }
                _ => {
                    let Some((lhs, rhs)) = trimmed.split_once('=') else {
                        return Err(perr(line, indent, format!("unrecognised line starting with `{}`", words[0])));
                    };
                    let name = lhs.trim();
                    check_ident(name, line, indent)?;
                    let rhs_col = indent + lhs.len() + 1;
                    let toks = tokenize(rhs, line, rhs_col);
                    open_depth = depth_delta(&toks);
                    eqs.push((name.to_string(), line, indent, toks));
                }
            }
        }
        if open_depth > 0 {
            let (_, l, c, _) = eqs.last().unwrap();
            return Err(perr(*l, *c, "unbalanced parentheses in equation"));
        }

        let node_ix: HashMap<String, NodeId> =
            nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), NodeId(i))).collect();
        let noise_ix: HashMap<String, NoiseId> =
            noises.iter().enumerate().map(|(i, n)| (n.name.clone(), NoiseId(i))).collect();
        let mut equations: Vec<Option<Expr>> = vec![None; nodes.len()];
        let end_line = text.lines().count().max(1);
        for (name, line, col, toks) in &eqs {
            let v = *node_ix
                .get(name)
                .ok_or_else(|| perr(*line, *col, format!("equation for undeclared node `{name}`")))?;
            if equations[v.0].is_some() {
                return Err(perr(*line, *col, format!("second equation for `{name}`")));
            }
            let end = toks.last().map(|t| (t.1, t.2 + 1)).unwrap_or((*line, *col));
            let mut p = ExprParser {
                toks,
                pos: 0,
                nodes: &node_ix,
                noises: &noise_ix,
                end,
            };
            let e = p.parse()?;
            if p.pos < toks.len() {
                let t = &toks[p.pos];
                return Err(perr(t.1, t.2, "trailing tokens after expression"));
            }
            equations[v.0] = Some(e);
        }
        let mut eq_final = Vec::with_capacity(nodes.len());
        for (i, e) in equations.into_iter().enumerate() {
            eq_final.push(e.ok_or_else(|| perr(end_line, 1, format!("node `{}` has no equation", nodes[i].name)))?);
        }
        let model = if edges.is_empty() {
            ScmModel::from_equations(nodes, eq_final, noises)
        } else {
            CausalGraph::new(nodes, &edges).and_then(|g| ScmModel::new(g, eq_final, noises))
        }
        .map_err(|e| perr(end_line, 1, e.to_string()))?;
        Ok(ModelSpecFile {
            description,
            seed,
            x,
            y,
            pool,
            model,
        })
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let g = m.graph();
        let mut s = String::new();
        if let Some(d) = &self.description {
            s.push_str(&format!("description: {d}\n"));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed: {seed}\n"));
        }
        if let Some(x) = &self.x {
            s.push_str(&format!("x: {x}\n"));
        }
        if let Some(y) = &self.y {
            s.push_str(&format!("y: {y}\n"));
        }
        if !self.pool.is_empty() {
            s.push_str(&format!("pool: {}\n", self.pool.join(" ")));
        }
        for n in g.nodes() {
            s.push_str(&format!(
                "node {} {}\n",
                n.name,
                if n.observed { "observed" } else { "hidden" }
            ));
        }
        for ns in m.noises() {
            let (kind, a, b) = match ns.distribution {
                Distribution::Gaussian { mean, sd } => ("gaussian", mean, sd),
                Distribution::Uniform { lo, hi } => ("uniform", lo, hi),
                Distribution::Laplace { loc, scale } => ("laplace", loc, scale),
            };
            s.push_str(&format!("noise {} {kind} {a:?} {b:?}\n", ns.name));
        }
        for (p, c) in g.edges() {
            s.push_str(&format!("edge {} -> {}\n", g.name(p), g.name(c)));
        }
        for &v in g.topological_order() {
            s.push_str(&format!("{} = {}\n", g.name(v), m.render(m.equation(v))));
        }
        s
    }
}

fn depth_delta(toks: &[(Tok, usize, usize)]) -> i64 {
    toks.iter()
        .map(|t| match t.0 {
            Tok::Open => 1,
            Tok::Close => -1,
            _ => 0,
        })
        .sum()
}

fn check_ident(s: &str, line: usize, col: usize) -> Result<()> {
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.')
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && UnaryKind::from_name(s).is_none()
        && s != "scale";
    if ok {
        Ok(())
    } else {
        Err(perr(line, col, format!("invalid name `{s}`")))
    }
}
