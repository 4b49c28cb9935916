//! Kernel-weighted local-constant and local-linear smoothing with product
//! Gaussian kernels. Two engines share one per-point solve: a direct O(n²)
//! sum and a linear-binning grid engine with separable correlations.

use std::collections::HashMap;

use rayon::prelude::*;

/// Grid points per bandwidth along each axis.
const GRID_PER_H: f64 = 8.0;
/// Kernel truncation in bandwidths.
const CUTOFF: f64 = 6.0;
const MIN_GRID: usize = 33;
/// Grid size cap per dimension count (index = d).
const MAX_GRID: [usize; 5] = [0, 4096, 512, 96, 32];
pub const MAX_BINNED_DIM: usize = 4;
/// Summed kernel weight below which the local fit is abandoned.
pub const MIN_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothOpts {
    pub local_linear: bool,
    pub leave_one_out: bool,
    /// Added to the slope diagonal as `ridge * h_j^2`.
    pub ridge: f64,
    /// Also compute the squared-weight sums needed for variance inflation.
    pub inflation: bool,
}

#[derive(Debug, Clone)]
pub struct Smoothed {
    pub fitted: Vec<f64>,
    /// `1 + sum_k w_k^2` for the effective linear weights; 1 when not requested.
    pub inflation: Vec<f64>,
    pub flagged: Vec<bool>,
}

/// Local moments about one query point, accumulated as (d+1)x(d+1) blocks.
#[derive(Clone)]
struct Local {
    m: [[f64; 5]; 5],
    q: [[f64; 5]; 5],
    b: [f64; 5],
}

impl Local {
    fn zero() -> Self {
        Local {
            m: [[0.0; 5]; 5],
            q: [[0.0; 5]; 5],
            b: [0.0; 5],
        }
    }
}

/// Solves `m a = e0` for a symmetric system of size `p` by Gaussian
/// elimination with partial pivoting. `None` when numerically singular.
fn solve_e0(m: &[[f64; 5]; 5], p: usize) -> Option<[f64; 5]> {
    let mut a = *m;
    let mut rhs = [0.0; 5];
    rhs[0] = 1.0;
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..p {
                    a[r][c] -= f * a[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = [0.0; 5];
    for r in (0..p).rev() {
        let mut s = rhs[r];
        for c in r + 1..p {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Turns accumulated local moments into a fitted value and inflation.
fn finish(mut loc: Local, d: usize, h: &[f64], opts: &SmoothOpts, fallback: f64) -> (f64, f64, bool) {
    if loc.m[0][0] <= MIN_WEIGHT {
        return (fallback, 1.0, true);
    }
    let nw = |loc: &Local| {
        let s0 = loc.m[0][0];
        let infl = if opts.inflation { 1.0 + loc.q[0][0] / (s0 * s0) } else { 1.0 };
        (loc.b[0] / s0, infl, false)
    };
    if !opts.local_linear {
        return nw(&loc);
    }
    let p = d + 1;
    for j in 0..d {
        loc.m[j + 1][j + 1] += opts.ridge * h[j] * h[j];
    }
    match solve_e0(&loc.m, p) {
        Some(a) => {
            let fit: f64 = (0..p).map(|i| a[i] * loc.b[i]).sum();
            let infl = if opts.inflation {
                let mut s = 0.0;
                for i in 0..p {
                    for j in 0..p {
                        s += a[i] * loc.q[i][j] * a[j];
                    }
                }
                1.0 + s.max(0.0)
            } else {
                1.0
            };
            (fit, infl, false)
        }
        None => nw(&loc),
    }
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

pub fn smooth(cols: &[Vec<f64>], y: &[f64], h: &[f64], opts: &SmoothOpts, force_exact: bool) -> Smoothed {
    let d = cols.len();
    if force_exact || d > MAX_BINNED_DIM {
        smooth_exact(cols, y, h, opts)
    } else {
        smooth_binned(cols, y, h, opts)
    }
}

/// Direct O(n² d) evaluation.
pub fn smooth_exact(cols: &[Vec<f64>], y: &[f64], h: &[f64], opts: &SmoothOpts) -> Smoothed {
    let n = y.len();
    let d = cols.len();
    let ybar = mean(y);
    let inv: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
    let out: Vec<(f64, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut loc = Local::zero();
            let mut u = vec![0.0; d];
            for k in 0..n {
                if opts.leave_one_out && k == i {
                    continue;
                }
                let mut e = 0.0;
                for j in 0..d {
                    let diff = cols[j][k] - cols[j][i];
                    u[j] = diff;
                    let t = diff * inv[j];
                    e += t * t;
                }
                let w = (-0.5 * e).exp();
                if w == 0.0 {
                    continue;
                }
                accumulate(&mut loc, w, &u, y[k], opts);
            }
            symmetrize(&mut loc, d);
            finish(loc, d, h, opts, ybar)
        })
        .collect();
    unpack(out)
}

fn accumulate(loc: &mut Local, w: f64, u: &[f64], yk: f64, opts: &SmoothOpts) {
    let w2 = w * w;
    loc.m[0][0] += w;
    loc.b[0] += w * yk;
    if opts.inflation {
        loc.q[0][0] += w2;
    }
    if !opts.local_linear {
        return;
    }
    let d = u.len();
    for j in 0..d {
        loc.m[0][j + 1] += w * u[j];
        loc.b[j + 1] += w * yk * u[j];
        for l in j..d {
            loc.m[j + 1][l + 1] += w * u[j] * u[l];
        }
        if opts.inflation {
            loc.q[0][j + 1] += w2 * u[j];
            for l in j..d {
                loc.q[j + 1][l + 1] += w2 * u[j] * u[l];
            }
        }
    }
}

fn symmetrize(loc: &mut Local, d: usize) {
    for i in 0..=d {
        for j in 0..i {
            loc.m[i][j] = loc.m[j][i];
            loc.q[i][j] = loc.q[j][i];
        }
    }
}

fn unpack(out: Vec<(f64, f64, bool)>) -> Smoothed {
    let mut fitted = Vec::with_capacity(out.len());
    let mut inflation = Vec::with_capacity(out.len());
    let mut flagged = Vec::with_capacity(out.len());
    for (f, i, g) in out {
        fitted.push(f);
        inflation.push(i);
        flagged.push(g);
    }
    Smoothed {
        fitted,
        inflation,
        flagged,
    }
}

struct Grid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    lo: Vec<f64>,
    delta: Vec<f64>,
    size: usize,
}

/// out[g] = sum_o taps[o + L] * arr[g + o] along `axis`, zero outside.
fn correlate(arr: &[f64], grid: &Grid, axis: usize, taps: &[f64]) -> Vec<f64> {
    let g = grid.dims[axis];
    let s = grid.strides[axis];
    let l = (taps.len() - 1) / 2;
    let mut out = vec![0.0; arr.len()];
    let block = g * s;
    for (src, dst) in arr.chunks(block).zip(out.chunks_mut(block)) {
        for t in 0..g {
            let o_lo = l.saturating_sub(t);
            let o_hi = (g - 1 - t + l).min(taps.len() - 1);
            let drow = &mut dst[t * s..(t + 1) * s];
            for (oi, &tap) in taps.iter().enumerate().take(o_hi + 1).skip(o_lo) {
                let pos = t + oi - l;
                let srow = &src[pos * s..(pos + 1) * s];
                for (dv, sv) in drow.iter_mut().zip(srow) {
                    *dv += tap * sv;
                }
            }
        }
    }
    out
}

/// Multi-index moments of one binned grid: key = per-axis powers.
fn moment_grids(
    base: &[f64],
    grid: &Grid,
    taps: &[[Vec<f64>; 3]],
    wanted: &[Vec<u8>],
) -> HashMap<Vec<u8>, Vec<f64>> {
    let d = grid.dims.len();
    let mut layer: HashMap<Vec<u8>, Vec<f64>> = HashMap::new();
    layer.insert(Vec::new(), base.to_vec());
    for axis in 0..d {
        let mut needed: Vec<Vec<u8>> = wanted.iter().map(|w| w[..=axis].to_vec()).collect();
        needed.sort();
        needed.dedup();
        let next: Vec<(Vec<u8>, Vec<f64>)> = needed
            .into_par_iter()
            .map(|key| {
                let prev = &layer[&key[..axis]];
                let out = correlate(prev, grid, axis, &taps[axis][key[axis] as usize]);
                (key, out)
            })
            .collect();
        layer = next.into_iter().collect();
    }
    layer
}

fn wanted_powers(d: usize, local_linear: bool, second: bool) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; d]];
    if local_linear {
        for j in 0..d {
            let mut e = vec![0u8; d];
            e[j] = 1;
            out.push(e);
        }
        if second {
            for j in 0..d {
                for l in j..d {
                    let mut e = vec![0u8; d];
                    e[j] += 1;
                    e[l] += 1;
                    out.push(e);
                }
            }
        }
    }
    out
}

/// Linear-binning grid engine for d <= 4.
pub fn smooth_binned(cols: &[Vec<f64>], y: &[f64], h: &[f64], opts: &SmoothOpts) -> Smoothed {
    let n = y.len();
    let d = cols.len();
    assert!((1..=MAX_BINNED_DIM).contains(&d));
    let ybar = mean(y);

    let mut dims = Vec::with_capacity(d);
    let mut lo = Vec::with_capacity(d);
    let mut delta = Vec::with_capacity(d);
    for j in 0..d {
        let (mn, mx) = cols[j]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let range = (mx - mn).max(1e-12);
        let want = (GRID_PER_H * range / h[j]).ceil() as usize + 1;
        let g = want.clamp(MIN_GRID, MAX_GRID[d]);
        dims.push(g);
        lo.push(mn);
        delta.push(range / (g - 1) as f64);
    }
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * dims[j + 1];
    }
    let size: usize = dims.iter().product();
    let grid = Grid {
        dims,
        strides,
        lo,
        delta,
        size,
    };

    // Cell index and fractional offset of every point.
    let mut cell = vec![0usize; n * d];
    let mut frac = vec![0.0f64; n * d];
    for i in 0..n {
        for j in 0..d {
            let pos = (cols[j][i] - grid.lo[j]) / grid.delta[j];
            let i0 = (pos.floor().max(0.0) as usize).min(grid.dims[j] - 2);
            cell[i * d + j] = i0;
            frac[i * d + j] = (pos - i0 as f64).clamp(0.0, 1.0);
        }
    }
    let corners = 1usize << d;
    let corner_weight = |i: usize, c: usize| -> (usize, f64) {
        let mut idx = 0;
        let mut w = 1.0;
        for j in 0..d {
            let bit = (c >> j) & 1;
            let f = frac[i * d + j];
            w *= if bit == 1 { f } else { 1.0 - f };
            idx += (cell[i * d + j] + bit) * grid.strides[j];
        }
        (idx, w)
    };

    let mut cgrid = vec![0.0; grid.size];
    let mut ygrid = vec![0.0; grid.size];
    for i in 0..n {
        for c in 0..corners {
            let (idx, w) = corner_weight(i, c);
            cgrid[idx] += w;
            ygrid[idx] += w * y[i];
        }
    }

    let kern = |o: f64, hj: f64, sq: bool| {
        let k = (-0.5 * (o / hj).powi(2)).exp();
        if sq {
            k * k
        } else {
            k
        }
    };
    let make_taps = |sq: bool| -> Vec<[Vec<f64>; 3]> {
        (0..d)
            .map(|j| {
                let l = (CUTOFF * h[j] / grid.delta[j]).ceil() as usize;
                let offs: Vec<f64> = (0..=2 * l).map(|t| (t as f64 - l as f64) * grid.delta[j]).collect();
                let k: Vec<f64> = offs.iter().map(|&o| kern(o, h[j], sq)).collect();
                let k1: Vec<f64> = k.iter().zip(&offs).map(|(a, o)| a * o).collect();
                let k2: Vec<f64> = k.iter().zip(&offs).map(|(a, o)| a * o * o).collect();
                [k, k1, k2]
            })
            .collect()
    };
    let taps = make_taps(false);
    let cw = wanted_powers(d, opts.local_linear, true);
    let yw = wanted_powers(d, opts.local_linear, false);
    let cm = moment_grids(&cgrid, &grid, &taps, &cw);
    let ym = moment_grids(&ygrid, &grid, &taps, &yw);
    let qm = if opts.inflation {
        let taps2 = make_taps(true);
        Some(moment_grids(&cgrid, &grid, &taps2, &cw))
    } else {
        None
    };

    // Flat lookup tables in a fixed order: [0], [e_j], [e_j + e_l] (j <= l).
    let order_c: Vec<&Vec<f64>> = cw.iter().map(|k| &cm[k]).collect();
    let order_y: Vec<&Vec<f64>> = yw.iter().map(|k| &ym[k]).collect();
    let order_q: Option<Vec<&Vec<f64>>> = qm.as_ref().map(|q| cw.iter().map(|k| &q[k]).collect());
    let pair = |j: usize, l: usize| -> usize {
        // position of (j, l), j <= l, after the 1 + d leading entries
        let mut p = 1 + d;
        for a in 0..j {
            p += d - a;
        }
        p + (l - j)
    };

    let out: Vec<(f64, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut loc = Local::zero();
            for c in 0..corners {
                let (idx, w) = corner_weight(i, c);
                if w == 0.0 {
                    continue;
                }
                let mut dl = [0.0; 4];
                for j in 0..d {
                    let bit = (c >> j) & 1;
                    dl[j] = ((cell[i * d + j] + bit) as f64 - cell[i * d + j] as f64 - frac[i * d + j])
                        * grid.delta[j];
                }
                add_shifted(&mut loc.m, &order_c, idx, &dl, d, w, opts.local_linear, &pair);
                if let Some(q) = &order_q {
                    add_shifted(&mut loc.q, q, idx, &dl, d, w, opts.local_linear, &pair);
                }
                let t0 = order_y[0][idx];
                loc.b[0] += w * t0;
                if opts.local_linear {
                    for j in 0..d {
                        loc.b[j + 1] += w * (order_y[1 + j][idx] + dl[j] * t0);
                    }
                }
            }
            if opts.leave_one_out {
                subtract_self(&mut loc, &frac[i * d..(i + 1) * d], &grid, h, d, y[i], opts);
            }
            symmetrize(&mut loc, d);
            finish(loc, d, h, opts, ybar)
        })
        .collect();
    unpack(out)
}

/// Adds `w` times the moments stored about a grid node, re-centred on the
/// query point (`dl` = node minus query), to the upper triangle of `m`.
#[allow(clippy::too_many_arguments)]
fn add_shifted(
    m: &mut [[f64; 5]; 5],
    grids: &[&Vec<f64>],
    idx: usize,
    dl: &[f64; 4],
    d: usize,
    w: f64,
    local_linear: bool,
    pair: &dyn Fn(usize, usize) -> usize,
) {
    let s0 = grids[0][idx];
    m[0][0] += w * s0;
    if !local_linear {
        return;
    }
    let mut s1 = [0.0; 4];
    for j in 0..d {
        s1[j] = grids[1 + j][idx];
        m[0][j + 1] += w * (s1[j] + dl[j] * s0);
    }
    for j in 0..d {
        for l in j..d {
            let sjl = grids[pair(j, l)][idx];
            m[j + 1][l + 1] += w * (sjl + dl[l] * s1[j] + dl[j] * s1[l] + dl[j] * dl[l] * s0);
        }
    }
}

/// Removes the query point's own binned mass from its local moments.
fn subtract_self(loc: &mut Local, frac: &[f64], grid: &Grid, h: &[f64], d: usize, yi: f64, opts: &SmoothOpts) {
    // ax[j][sq][p]: per-axis self sums.
    let mut ax = [[[0.0; 3]; 2]; 4];
    for j in 0..d {
        let f = frac[j];
        let wc = [1.0 - f, f];
        for (sq, slot) in ax[j].iter_mut().enumerate() {
            for c in 0..2 {
                for c2 in 0..2 {
                    let o = (c2 as f64 - c as f64) * grid.delta[j];
                    let mut k = (-0.5 * (o / h[j]).powi(2)).exp();
                    if sq == 1 {
                        k *= k;
                    }
                    let u = (c2 as f64 - f) * grid.delta[j];
                    let base = wc[c] * wc[c2] * k;
                    slot[0] += base;
                    slot[1] += base * u;
                    slot[2] += base * u * u;
                }
            }
        }
    }
    let prod = |sq: usize, pw: &[u8; 4]| -> f64 { (0..d).map(|j| ax[j][sq][pw[j] as usize]).product() };
    let mut pw = [0u8; 4];
    for sq in 0..2 {
        if sq == 1 && !opts.inflation {
            continue;
        }
        let target = if sq == 0 { &mut loc.m } else { &mut loc.q };
        target[0][0] -= prod(sq, &pw);
        if opts.local_linear {
            for j in 0..d {
                pw[j] = 1;
                target[0][j + 1] -= prod(sq, &pw);
                pw[j] = 0;
                for l in j..d {
                    pw[j] += 1;
                    pw[l] += 1;
                    target[j + 1][l + 1] -= prod(sq, &pw);
                    pw[j] = 0;
                    pw[l] = 0;
                }
            }
        }
    }
    loc.b[0] -= yi * prod(0, &pw);
    if opts.local_linear {
        for j in 0..d {
            pw[j] = 1;
            loc.b[j + 1] -= yi * prod(0, &pw);
            pw[j] = 0;
        }
    }
}
