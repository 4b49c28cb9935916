//! Groups of nearby rows in the conditioning space.

/// Partitions rows into groups of similar conditioning values. With no
/// conditioning columns there is a single group. One column: sort and cut
/// into runs of `k` (the remainder joins the last run). Several columns:
/// recursive median splits on the widest axis until groups hold fewer than
/// `2k` rows.
pub fn build_strata(cols: &[Vec<f64>], n: usize, k: usize) -> Vec<Vec<usize>> {
    if cols.is_empty() || n < 2 * k {
        return vec![(0..n).collect()];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if cols.len() == 1 {
        let c = &cols[0];
        idx.sort_by(|&i, &j| c[i].total_cmp(&c[j]).then(i.cmp(&j)));
        let groups = n / k;
        let mut out: Vec<Vec<usize>> = (0..groups).map(|g| idx[g * k..(g + 1) * k].to_vec()).collect();
        out.last_mut().unwrap().extend_from_slice(&idx[groups * k..]);
        return out;
    }
    let mut out = Vec::new();
    split(cols, idx, k, &mut out);
    out
}

fn split(cols: &[Vec<f64>], mut idx: Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if idx.len() < 2 * k {
        out.push(idx);
        return;
    }
    let spread = |c: &Vec<f64>| {
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(c[i]), b.max(c[i])));
        hi - lo
    };
    let axis = (0..cols.len())
        .max_by(|&a, &b| spread(&cols[a]).total_cmp(&spread(&cols[b])).then(b.cmp(&a)))
        .unwrap();
    let c = &cols[axis];
    idx.sort_by(|&i, &j| c[i].total_cmp(&c[j]).then(i.cmp(&j)));
    let right = idx.split_off(idx.len() / 2);
    split(cols, idx, k, out);
    split(cols, right, k, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn strata_partition_rows(
            vals in prop::collection::vec(-100.0f64..100.0, 40..400),
            d in 1usize..4,
            k in 2usize..30,
        ) {
            let n = vals.len() / d;
            let cols: Vec<Vec<f64>> = (0..d).map(|j| vals[j * n..(j + 1) * n].to_vec()).collect();
            let s = build_strata(&cols, n, k);
            let mut all: Vec<usize> = s.iter().flatten().copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if n >= 2 * k {
                for g in &s {
                    prop_assert!(g.len() >= k && g.len() < 2 * k);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_groups_are_sorted_runs() {
        let c = vec![(0..45).map(|i| ((i * 17) % 45) as f64).collect::<Vec<_>>()];
        let s = build_strata(&c, 45, 10);
        assert_eq!(s.len(), 4);
        assert_eq!(s[3].len(), 15);
        let max0 = s[0].iter().map(|&i| c[0][i]).fold(f64::MIN, f64::max);
        let min1 = s[1].iter().map(|&i| c[0][i]).fold(f64::MAX, f64::min);
        assert!(max0 < min1);
    }
}
