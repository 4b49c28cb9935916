//! Directed acyclic graphs with observed/hidden nodes and d-separation queries.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub observed: bool,
}

/// Immutable DAG. Construct with [`CausalGraph::new`]; nodes are indexed in
/// declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    nodes: Vec<Node>,
    index: HashMap<String, NodeId>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    topo: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relatives {
    pub parents: BTreeSet<NodeId>,
    pub descendants: BTreeSet<NodeId>,
    pub non_descendants: BTreeSet<NodeId>,
}

impl CausalGraph {
    pub fn new(nodes: Vec<Node>, edges: &[(String, String)]) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.name.clone(), NodeId(i)).is_some() {
                return Err(Error::DuplicateNode(n.name.clone()));
            }
        }
        let k = nodes.len();
        let mut parents = vec![Vec::new(); k];
        let mut children = vec![Vec::new(); k];
        for (a, b) in edges {
            let pa = *index.get(a).ok_or_else(|| Error::UnknownNode(a.clone()))?;
            let ch = *index.get(b).ok_or_else(|| Error::UnknownNode(b.clone()))?;
            if pa == ch {
                return Err(Error::SelfEdge(a.clone()));
            }
            if !parents[ch.0].contains(&pa) {
                parents[ch.0].push(pa);
                children[pa.0].push(ch);
            }
        }
        for p in parents.iter_mut() {
            p.sort();
        }
        for c in children.iter_mut() {
            c.sort();
        }
        // Kahn's algorithm, smallest index first so the order is canonical.
        let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<usize> = (0..k).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(k);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            topo.push(NodeId(i));
            for c in &children[i] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    ready.insert(c.0);
                }
            }
        }
        if topo.len() < k {
            let stuck = (0..k).find(|&i| indeg[i] > 0).unwrap();
            return Err(Error::Cycle(nodes[stuck].name.clone()));
        }
        Ok(CausalGraph {
            nodes,
            index,
            parents,
            children,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn id(&self, name: &str) -> Result<NodeId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.nodes[v.0].name
    }

    pub fn is_observed(&self, v: NodeId) -> bool {
        self.nodes[v.0].observed
    }

    pub fn parents(&self, v: NodeId) -> &[NodeId] {
        &self.parents[v.0]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.0]
    }

    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for p in ps {
                out.push((*p, NodeId(c)));
            }
        }
        out.sort();
        out
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(format!("#{}", v.0)))
        }
    }

    pub fn descendants(&self, v: NodeId) -> Result<BTreeSet<NodeId>> {
        self.check(v)?;
        let mut seen = vec![false; self.len()];
        let mut stack = self.children[v.0].clone();
        let mut out = BTreeSet::new();
        while let Some(u) = stack.pop() {
            if !seen[u.0] {
                seen[u.0] = true;
                out.insert(u);
                stack.extend_from_slice(&self.children[u.0]);
            }
        }
        Ok(out)
    }

    pub fn relatives(&self, v: NodeId) -> Result<Relatives> {
        let descendants = self.descendants(v)?;
        let non_descendants = self.ids().filter(|u| !descendants.contains(u)).collect();
        Ok(Relatives {
            parents: self.parents[v.0].iter().copied().collect(),
            descendants,
            non_descendants,
        })
    }

    /// True when an edge joins `a` and `b` in either direction, or a hidden
    /// node has direct edges into both.
    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::SameNode(self.name(a).to_string()));
        }
        if self.parents[b.0].contains(&a) || self.parents[a.0].contains(&b) {
            return Ok(true);
        }
        Ok(self.parents[a.0]
            .iter()
            .any(|k| !self.is_observed(*k) && self.parents[b.0].contains(k)))
    }

    /// `a` is a parent of `b` or shares a hidden parent with it.
    pub fn is_potential_cause(&self, a: NodeId, b: NodeId) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::SameNode(self.name(a).to_string()));
        }
        if self.parents[b.0].contains(&a) {
            return Ok(true);
        }
        Ok(self.parents[a.0]
            .iter()
            .any(|k| !self.is_observed(*k) && self.parents[b.0].contains(k)))
    }

    /// d-separation of `a` and `b` given `s`, by reachability over
    /// (node, arrival direction) states.
    pub fn d_separated(&self, a: NodeId, b: NodeId, s: &[NodeId]) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        for v in s {
            self.check(*v)?;
        }
        if a == b {
            return Err(Error::SameNode(self.name(a).to_string()));
        }
        if let Some(v) = s.iter().find(|v| **v == a || **v == b) {
            return Err(Error::Overlap(self.name(*v).to_string()));
        }
        let k = self.len();
        let mut in_s = vec![false; k];
        for v in s {
            in_s[v.0] = true;
        }
        // Nodes that are in S or have a descendant in S.
        let mut anc = vec![false; k];
        let mut stack: Vec<NodeId> = s.to_vec();
        while let Some(u) = stack.pop() {
            if !anc[u.0] {
                anc[u.0] = true;
                stack.extend_from_slice(&self.parents[u.0]);
            }
        }
        // Direction flag: true = arrived from a child (travelling up).
        let mut visited = vec![[false; 2]; k];
        let mut queue = vec![(a, true)];
        while let Some((u, up)) = queue.pop() {
            let slot = up as usize;
            if visited[u.0][slot] {
                continue;
            }
            visited[u.0][slot] = true;
            if u == b {
                return Ok(false);
            }
            if up {
                if !in_s[u.0] {
                    for p in &self.parents[u.0] {
                        queue.push((*p, true));
                    }
                    for c in &self.children[u.0] {
                        queue.push((*c, false));
                    }
                }
            } else {
                if !in_s[u.0] {
                    for c in &self.children[u.0] {
                        queue.push((*c, false));
                    }
                }
                if anc[u.0] {
                    for p in &self.parents[u.0] {
                        queue.push((*p, true));
                    }
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(nodes: &[(&str, bool)], edges: &[(&str, &str)]) -> CausalGraph {
        CausalGraph::new(
            nodes
                .iter()
                .map(|(n, o)| Node {
                    name: n.to_string(),
                    observed: *o,
                })
                .collect(),
            &edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn set(g: &CausalGraph, names: &[&str]) -> BTreeSet<NodeId> {
        names.iter().map(|n| g.id(n).unwrap()).collect()
    }

    #[test]
    fn chain_relatives() {
        let c = g(&[("A", true), ("B", true), ("C", true)], &[("A", "B"), ("B", "C")]);
        let r = c.relatives(c.id("B").unwrap()).unwrap();
        assert_eq!(r.parents, set(&c, &["A"]));
        assert_eq!(r.descendants, set(&c, &["C"]));
        assert_eq!(r.non_descendants, set(&c, &["A", "B"]));
    }

    #[test]
    fn isolated_relatives() {
        let c = g(&[("A", true), ("N", true)], &[]);
        let r = c.relatives(c.id("N").unwrap()).unwrap();
        assert!(r.parents.is_empty() && r.descendants.is_empty());
        assert_eq!(r.non_descendants.len(), 2);
    }

    #[test]
    fn diamond_descendants() {
        let c = g(
            &[("A", true), ("B", true), ("C", true), ("D", true)],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")],
        );
        assert_eq!(
            c.relatives(c.id("A").unwrap()).unwrap().descendants,
            set(&c, &["B", "C", "D"])
        );
    }

    #[test]
    fn rejects_bad_edges() {
        let nodes = vec![
            Node { name: "A".into(), observed: true },
            Node { name: "B".into(), observed: true },
        ];
        let e = |a: &str, b: &str| (a.to_string(), b.to_string());
        assert!(matches!(
            CausalGraph::new(nodes.clone(), &[e("A", "A")]),
            Err(Error::SelfEdge(_))
        ));
        assert!(matches!(
            CausalGraph::new(nodes.clone(), &[e("A", "B"), e("B", "A")]),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(
            CausalGraph::new(nodes, &[e("A", "Q")]),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn canonical_dsep() {
        let c = g(&[("A", true), ("B", true), ("C", true)], &[("A", "B"), ("B", "C")]);
        let (a, b, cc) = (c.id("A").unwrap(), c.id("B").unwrap(), c.id("C").unwrap());
        assert!(c.d_separated(a, cc, &[b]).unwrap());
        assert!(!c.d_separated(a, cc, &[]).unwrap());
        let k = g(&[("A", true), ("B", true), ("C", true)], &[("A", "B"), ("C", "B")]);
        assert!(k.d_separated(a, cc, &[]).unwrap());
        assert!(!k.d_separated(a, cc, &[b]).unwrap());
        assert!(matches!(c.d_separated(a, cc, &[a]), Err(Error::Overlap(_))));
    }

    #[test]
    fn collider_through_descendant() {
        let c = g(
            &[("A", true), ("B", true), ("C", true), ("D", true)],
            &[("A", "B"), ("C", "B"), ("B", "D")],
        );
        let ids = |n| c.id(n).unwrap();
        assert!(!c.d_separated(ids("A"), ids("C"), &[ids("D")]).unwrap());
    }

    #[test]
    fn fig1b_skeleton() {
        let c = g(
            &[("V", false), ("Z", true), ("X", true), ("Y", true)],
            &[("V", "X"), ("Z", "X"), ("Z", "Y"), ("X", "Y")],
        );
        let ids = |n| c.id(n).unwrap();
        assert!(!c.d_separated(ids("V"), ids("Y"), &[]).unwrap());
        assert!(c.d_separated(ids("V"), ids("Z"), &[]).unwrap());
        assert!(!c.d_separated(ids("V"), ids("Z"), &[ids("X")]).unwrap());
    }

    #[test]
    fn adjacency() {
        let c = g(&[("X", true), ("Y", true)], &[("X", "Y")]);
        assert!(c.is_adjacent(NodeId(0), NodeId(1)).unwrap());
        let h = g(&[("U", false), ("X", true), ("Y", true)], &[("U", "X"), ("U", "Y")]);
        assert!(h.is_adjacent(h.id("X").unwrap(), h.id("Y").unwrap()).unwrap());
        let o = g(&[("U", true), ("X", true), ("Y", true)], &[("U", "X"), ("U", "Y")]);
        assert!(!o.is_adjacent(o.id("X").unwrap(), o.id("Y").unwrap()).unwrap());
        let ch = g(&[("X", true), ("Z", true), ("Y", true)], &[("X", "Z"), ("Z", "Y")]);
        assert!(!ch.is_adjacent(ch.id("X").unwrap(), ch.id("Y").unwrap()).unwrap());
    }
}
