//! Reference implementations used only by tests.

#![allow(dead_code)]

/// d-separation by enumerating every simple path of the skeleton.
/// `parents[v]` lists the parents of node v.
pub fn dsep_by_paths(parents: &[Vec<usize>], a: usize, b: usize, s: &[usize]) -> bool {
    let k = parents.len();
    let mut adj = vec![Vec::new(); k];
    for (v, ps) in parents.iter().enumerate() {
        for &p in ps {
            adj[v].push(p);
            adj[p].push(v);
        }
    }
    let mut desc_in_s = vec![false; k];
    for v in 0..k {
        desc_in_s[v] = descendants_or_self(parents, v).iter().any(|d| s.contains(d));
    }
    let mut path = vec![a];
    !any_open_path(parents, &adj, &desc_in_s, s, b, &mut path)
}

fn descendants_or_self(parents: &[Vec<usize>], v: usize) -> Vec<usize> {
    let mut out = vec![v];
    let mut i = 0;
    while i < out.len() {
        let u = out[i];
        for (c, ps) in parents.iter().enumerate() {
            if ps.contains(&u) && !out.contains(&c) {
                out.push(c);
            }
        }
        i += 1;
    }
    out
}

fn any_open_path(
    parents: &[Vec<usize>],
    adj: &[Vec<usize>],
    desc_in_s: &[bool],
    s: &[usize],
    b: usize,
    path: &mut Vec<usize>,
) -> bool {
    let last = *path.last().unwrap();
    if last == b {
        return path_open(parents, desc_in_s, s, path);
    }
    for &nxt in &adj[last] {
        if path.contains(&nxt) {
            continue;
        }
        path.push(nxt);
        let open = any_open_path(parents, adj, desc_in_s, s, b, path);
        path.pop();
        if open {
            return true;
        }
    }
    false
}

fn path_open(parents: &[Vec<usize>], desc_in_s: &[bool], s: &[usize], path: &[usize]) -> bool {
    for w in path.windows(3) {
        let (l, m, r) = (w[0], w[1], w[2]);
        let collider = parents[m].contains(&l) && parents[m].contains(&r);
        if collider {
            if !desc_in_s[m] {
                return false;
            }
        } else if s.contains(&m) {
            return false;
        }
    }
    true
}

fn median_abs_diff(v: &[f64]) -> f64 {
    let mut d = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d.push((v[i] - v[j]).abs());
        }
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

fn centered_gram(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let s = median_abs_diff(v);
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (-0.5 * ((v[i] - v[j]) / s).powi(2)).exp()).collect())
        .collect();
    let row: Vec<f64> = k.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| (0..n).map(|j| k[i][j] - row[i] - row[j] + all).collect())
        .collect()
}

/// Biased HSIC, trace(K H L H) / n^2, with `b` reindexed by `perm`.
fn hsic_v(kc: &[Vec<f64>], lc: &[Vec<f64>], perm: &[usize]) -> f64 {
    let n = kc.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += kc[i][j] * lc[perm[i]][perm[j]];
        }
    }
    s / (n * n) as f64
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Exact permutation p-value: share of all n! reorderings of `b` whose HSIC
/// reaches the observed one (the identity included).
pub fn hsic_exhaustive_p(a: &[f64], b: &[f64]) -> (f64, usize, usize) {
    let n = a.len();
    let kc = centered_gram(a);
    let lc = centered_gram(b);
    let mut p: Vec<usize> = (0..n).collect();
    let obs = hsic_v(&kc, &lc, &p);
    let tol = 1e-12 * obs.abs();
    let (mut count, mut total) = (0usize, 0usize);
    loop {
        total += 1;
        if hsic_v(&kc, &lc, &p) >= obs - tol {
            count += 1;
        }
        if !next_permutation(&mut p) {
            break;
        }
    }
    (count as f64 / total as f64, count, total)
}

/// All DAGs on `k` nodes whose edges point from lower to higher index; every
/// DAG is isomorphic to one of these.
pub fn ordered_dags(k: usize) -> Vec<Vec<Vec<usize>>> {
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    (0u32..1 << pairs.len())
        .map(|mask| {
            let mut parents = vec![Vec::new(); k];
            for (bit, &(i, j)) in pairs.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    parents[j].push(i);
                }
            }
            parents
        })
        .collect()
}
