//! HSIC with Gaussian kernels and a within-stratum permutation null.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{mean_sd, median_pairwise};

/// Relative slack when comparing permuted statistics with the observed one.
const TIE_TOL: f64 = 1e-12;
/// The same for single-precision features, where reordering tied rows
/// moves the statistic by rounding error.
const TIE_TOL_F32: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsicOpts {
    /// Up to this many rows the full Gram matrices are used.
    pub exact_max_rows: usize,
    /// Landmarks for the low-rank feature approximation above that.
    pub rank: usize,
}

impl Default for HsicOpts {
    fn default() -> Self {
        HsicOpts {
            exact_max_rows: 1000,
            rank: 10,
        }
    }
}

pub fn kernel_bandwidth(v: &[f64], name: &str) -> Result<f64> {
    let (m, sd) = mean_sd(v);
    if !(sd > 1e-12 * m.abs().max(1.0)) {
        return Err(Error::Degenerate(name.to_string()));
    }
    let med = median_pairwise(v);
    Ok(if med > 0.0 { med } else { sd })
}

/// Low-rank features up to this width are stored as zero-padded
/// single-precision rows.
const PAD: usize = 12;
const PAD_BLOCK: usize = 256;

/// Row-major feature matrix (n x m), the same padded to `PAD` columns, or a
/// full Gram matrix (n x n).
enum Rep {
    Features { data: Vec<f64>, m: usize },
    Padded(Vec<[f32; PAD]>),
    Gram(Vec<f64>),
}

fn padded(rep: Rep) -> Rep {
    match rep {
        Rep::Features { data, m } if m <= PAD => Rep::Padded(
            data.chunks(m)
                .map(|row| {
                    let mut r = [0.0; PAD];
                    for (o, v) in r.iter_mut().zip(row) {
                        *o = *v as f32;
                    }
                    r
                })
                .collect(),
        ),
        other => other,
    }
}

fn gauss(a: f64, b: f64, s: f64) -> f64 {
    let t = (a - b) / s;
    (-0.5 * t * t).exp()
}

fn nystrom(v: &[f64], sigma: f64, rank: usize) -> Rep {
    let n = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut marks: Vec<f64> = (0..rank)
        .map(|k| sorted[(((k as f64 + 0.5) / rank as f64) * n as f64).floor() as usize].min(sorted[n - 1]))
        .collect();
    marks.dedup();
    let m = marks.len();
    let kmm = DMatrix::from_fn(m, m, |i, j| gauss(marks[i], marks[j], sigma));
    let eig = SymmetricEigen::new(kmm);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 1e-10 * lmax).collect();
    let r = keep.len();
    // Projection: K_nm V diag(1/sqrt(lambda)).
    let mut proj = vec![0.0; m * r];
    for (c, &k) in keep.iter().enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        for i in 0..m {
            proj[i * r + c] = eig.eigenvectors[(i, k)] / s;
        }
    }
    let mut data = vec![0.0; n * r];
    let mut krow = vec![0.0; m];
    for (i, row) in data.chunks_mut(r).enumerate() {
        for (kv, l) in krow.iter_mut().zip(&marks) {
            *kv = gauss(v[i], *l, sigma);
        }
        for (c, out) in row.iter_mut().enumerate() {
            *out = (0..m).map(|j| krow[j] * proj[j * r + c]).sum();
        }
    }
    Rep::Features { data, m: r }
}

fn gram(v: &[f64], sigma: f64) -> Rep {
    let n = v.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = gauss(v[i], v[j], sigma);
        }
    }
    Rep::Gram(k)
}

/// Subtracts stratum means. `strata` are contiguous index ranges.
fn center(rep: &mut Rep, strata: &[(usize, usize)], n: usize) {
    match rep {
        Rep::Features { data, m } => {
            let m = *m;
            for &(a, b) in strata {
                for c in 0..m {
                    let mean = (a..b).map(|i| data[i * m + c]).sum::<f64>() / (b - a) as f64;
                    for i in a..b {
                        data[i * m + c] -= mean;
                    }
                }
            }
        }
        Rep::Padded(_) => unreachable!("padding happens after centering"),
        Rep::Gram(k) => {
            // Rows, then columns: (I - B) K (I - B).
            for &(a, b) in strata {
                let len = (b - a) as f64;
                for j in 0..n {
                    let mean = (a..b).map(|i| k[i * n + j]).sum::<f64>() / len;
                    for i in a..b {
                        k[i * n + j] -= mean;
                    }
                }
            }
            for i in 0..n {
                for &(a, b) in strata {
                    let row = &mut k[i * n + a..i * n + b];
                    let mean = row.iter().sum::<f64>() / (b - a) as f64;
                    row.iter_mut().for_each(|v| *v -= mean);
                }
            }
        }
    }
}

/// Statistic with the first variable's rows reordered by `perm`.
fn statistic(a: &Rep, b: &Rep, perm: &[usize], n: usize) -> f64 {
    match (a, b) {
        (Rep::Padded(fa), Rep::Padded(fb)) => {
            // Single-precision partial sums over short blocks.
            let mut total = [[0.0f64; PAD]; PAD];
            for (pb, bb) in perm.chunks(PAD_BLOCK).zip(fb.chunks(PAD_BLOCK)) {
                let mut c = [[0.0f32; PAD]; PAD];
                for (&p, rb) in pb.iter().zip(bb) {
                    let ra = &fa[p];
                    for (crow, &av) in c.iter_mut().zip(ra) {
                        for (cv, &bv) in crow.iter_mut().zip(rb) {
                            *cv += av * bv;
                        }
                    }
                }
                for (t, v) in total.iter_mut().flatten().zip(c.iter().flatten()) {
                    *t += *v as f64;
                }
            }
            total.iter().flatten().map(|v| v * v).sum::<f64>() / (n as f64 * n as f64)
        }
        (Rep::Features { data: fa, m: ma }, Rep::Features { data: fb, m: mb }) => {
            let (ma, mb) = (*ma, *mb);
            let mut c = vec![0.0; ma * mb];
            for (i, &p) in perm.iter().enumerate() {
                let ra = &fa[p * ma..(p + 1) * ma];
                let rb = &fb[i * mb..(i + 1) * mb];
                for (u, &av) in ra.iter().enumerate() {
                    let crow = &mut c[u * mb..(u + 1) * mb];
                    for (cv, &bv) in crow.iter_mut().zip(rb) {
                        *cv += av * bv;
                    }
                }
            }
            c.iter().map(|v| v * v).sum::<f64>() / (n as f64 * n as f64)
        }
        (Rep::Gram(ka), Rep::Gram(kb)) => {
            let mut s = 0.0;
            for i in 0..n {
                let pi = perm[i];
                let rb = &kb[i * n..(i + 1) * n];
                let ra = &ka[pi * n..(pi + 1) * n];
                for j in 0..n {
                    s += ra[perm[j]] * rb[j];
                }
            }
            s / (n as f64 * n as f64)
        }
        _ => unreachable!("both sides use the same representation"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsicOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// Permutations drawn, or n! - 1 when enumerated.
    pub n_permutations: usize,
    pub exhaustive: bool,
    pub bandwidths: [f64; 2],
    pub rank: [usize; 2],
}

fn factorial(n: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))
}

/// Permutation HSIC test of `a` against `b` where `a` is shuffled within the
/// given strata (disjoint index groups covering all rows).
pub fn stratified_hsic(
    a: &[f64],
    b: &[f64],
    strata: &[Vec<usize>],
    n_perm: usize,
    seed: u64,
    opts: &HsicOpts,
) -> Result<HsicOutcome> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::InvalidArgument("columns differ in length".into()));
    }
    if strata.iter().map(Vec::len).sum::<usize>() != n {
        return Err(Error::InvalidArgument("strata do not cover all rows".into()));
    }
    // Canonical row order: strata in the given order, rows inside a stratum
    // sorted by (a, b). Makes the result independent of input row labels.
    let mut order = Vec::with_capacity(n);
    let mut ranges = Vec::with_capacity(strata.len());
    for g in strata {
        let start = order.len();
        let mut g = g.clone();
        g.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
        order.extend(g);
        ranges.push((start, order.len()));
    }
    let ca: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let cb: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let sa = kernel_bandwidth(&ca, "first column")?;
    let sb = kernel_bandwidth(&cb, "second column")?;
    let (mut ra, mut rb) = if n <= opts.exact_max_rows {
        (gram(&ca, sa), gram(&cb, sb))
    } else {
        (nystrom(&ca, sa, opts.rank), nystrom(&cb, sb, opts.rank))
    };
    let rank = |r: &Rep| match r {
        Rep::Features { m, .. } => *m,
        Rep::Padded(_) | Rep::Gram(_) => n,
    };
    let ranks = [rank(&ra), rank(&rb)];
    center(&mut ra, &ranges, n);
    center(&mut rb, &ranges, n);
    let (ra, rb) = (padded(ra), padded(rb));
    let ident: Vec<usize> = (0..n).collect();
    let obs = statistic(&ra, &rb, &ident, n);
    let tol = if matches!(ra, Rep::Padded(_)) { TIE_TOL_F32 } else { TIE_TOL };
    let ge = |s: f64| s >= obs - tol * obs.abs();

    let total = factorial(n);
    if ranges.len() == 1 && total.is_some_and(|t| n_perm >= t - 1) {
        let t = total.unwrap();
        let count = enumerate_all(n, |p| ge(statistic(&ra, &rb, p, n)));
        return Ok(HsicOutcome {
            statistic: obs,
            p_value: count as f64 / t as f64,
            n_permutations: t - 1,
            exhaustive: true,
            bandwidths: [sa, sb],
            rank: ranks,
        });
    }
    let count: usize = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let mut perm = ident.clone();
            for &(s, e) in &ranges {
                perm[s..e].shuffle(&mut rng);
            }
            ge(statistic(&ra, &rb, &perm, n)) as usize
        })
        .sum();
    Ok(HsicOutcome {
        statistic: obs,
        p_value: (1 + count) as f64 / (n_perm + 1) as f64,
        n_permutations: n_perm,
        exhaustive: false,
        bandwidths: [sa, sb],
        rank: ranks,
    })
}

/// Calls `f` on every permutation of 0..n (Heap's algorithm); counts trues.
fn enumerate_all<F: Fn(&[usize]) -> bool>(n: usize, f: F) -> usize {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut count = f(&p) as usize;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            count += f(&p) as usize;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    count
}
