mod support;

use canoise_core::graph::{CausalGraph, Node, NodeId};
use proptest::prelude::*;
use support::oracles::{dsep_by_paths, ordered_dags};

fn build(parents: &[Vec<usize>]) -> CausalGraph {
    let nodes = (0..parents.len())
        .map(|i| Node {
            name: format!("v{i}"),
            observed: true,
        })
        .collect();
    let edges: Vec<(String, String)> = parents
        .iter()
        .enumerate()
        .flat_map(|(c, ps)| ps.iter().map(move |p| (format!("v{p}"), format!("v{c}"))))
        .collect();
    CausalGraph::new(nodes, &edges).unwrap()
}

fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0u32..1 << items.len())
        .map(|m| items.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, v)| *v).collect())
        .collect()
}

#[test]
fn dsep_matches_path_enumeration_on_all_small_dags() {
    let mut queries = 0usize;
    for k in 2..=5 {
        for parents in ordered_dags(k) {
            let g = build(&parents);
            for a in 0..k {
                for b in a + 1..k {
                    let rest: Vec<usize> = (0..k).filter(|v| *v != a && *v != b).collect();
                    for s in subsets(&rest) {
                        let ids: Vec<NodeId> = s.iter().map(|v| NodeId(*v)).collect();
                        let got = g.d_separated(NodeId(a), NodeId(b), &ids).unwrap();
                        let want = dsep_by_paths(&parents, a, b, &s);
                        assert_eq!(got, want, "parents {parents:?}, {a} vs {b} given {s:?}");
                        queries += 1;
                    }
                }
            }
        }
    }
    assert!(queries > 80_000);
}

fn arb_dag() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..8).prop_flat_map(|k| {
        proptest::collection::vec(any::<bool>(), k * (k - 1) / 2).prop_map(move |bits| {
            let mut parents = vec![Vec::new(); k];
            let mut it = bits.into_iter();
            for j in 0..k {
                for i in 0..j {
                    if it.next().unwrap() {
                        parents[j].push(i);
                    }
                }
            }
            parents
        })
    })
}

proptest! {
    #[test]
    fn dsep_is_symmetric(parents in arb_dag(), mask in any::<u32>()) {
        let g = build(&parents);
        let k = parents.len();
        for a in 0..k {
            for b in a + 1..k {
                let s: Vec<NodeId> = (0..k)
                    .filter(|v| *v != a && *v != b && mask >> v & 1 == 1)
                    .map(NodeId)
                    .collect();
                prop_assert_eq!(
                    g.d_separated(NodeId(a), NodeId(b), &s).unwrap(),
                    g.d_separated(NodeId(b), NodeId(a), &s).unwrap()
                );
            }
        }
    }

    #[test]
    fn relatives_partition_the_nodes(parents in arb_dag()) {
        let g = build(&parents);
        for v in g.ids() {
            let r = g.relatives(v).unwrap();
            prop_assert!(r.descendants.is_disjoint(&r.non_descendants));
            prop_assert_eq!(r.descendants.len() + r.non_descendants.len(), g.len());
            prop_assert!(r.parents.is_subset(&r.non_descendants));
            prop_assert!(r.non_descendants.contains(&v));
        }
    }

    #[test]
    fn parents_screen_off_non_descendants(parents in arb_dag()) {
        // Local Markov property.
        let g = build(&parents);
        for v in g.ids() {
            let r = g.relatives(v).unwrap();
            let pa: Vec<NodeId> = r.parents.iter().copied().collect();
            for u in &r.non_descendants {
                if *u != v && !r.parents.contains(u) {
                    prop_assert!(g.d_separated(v, *u, &pa).unwrap());
                }
            }
        }
    }
}
