//! Leave-one-out nearest-neighbour conditional features on a pooled sample.

// Unused whenever std is linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::contrast::{order_statistic_index, ContrastKind};
use crate::distributions::SampleMatrix;
use crate::error::{invalid, Error, Result};

/// `ceil(n^(1/3))`, capped at `n - 1`. Larger windows reach far into the
/// sparse tails and bias heavy-tailed outputs.
pub fn default_neighbors(n: usize) -> usize {
    let k = (n as f64).cbrt().ceil() as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

/// For every row `r`, the feature of `Y` over the `k` rows nearest to `r`
/// in the standardized coordinates `given`, excluding `r` itself.
/// Distance ties are broken by row order.
pub fn knn_features(inputs: &SampleMatrix, outputs: &[f64], given: Coalition, k: usize, kind: ContrastKind) -> Result<Vec<f64>> {
    let n = inputs.rows();
    if outputs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: outputs.len() });
    }
    if k == 0 || k >= n {
        return Err(invalid("k_neighbors", "must lie in 1..n"));
    }
    if given.is_empty() || !given.is_subset_of(Coalition::full(inputs.cols())) {
        return Err(invalid("given", "needs a nonempty subset of the input columns"));
    }
    let cols: Vec<usize> = given.iter().collect();
    if let [c] = cols.as_slice() {
        return Ok(window_features(&inputs.column(*c), outputs, k, kind));
    }
    Ok(brute_force_features(inputs, outputs, &cols, k, kind))
}

/// Fenwick tree over ranks, for order statistics of a sliding multiset.
struct RankCounts {
    tree: Vec<u32>,
    top_bit: usize,
}

impl RankCounts {
    fn new(n: usize) -> Self {
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self { tree: vec![0; n + 1], top_bit }
    }

    fn update(&mut self, rank: usize, add: bool) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            if add {
                self.tree[i] += 1;
            } else {
                self.tree[i] -= 1;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Rank of the `m`-th smallest element, zero-based `m`.
    fn select(&self, m: usize) -> usize {
        let mut pos = 0;
        let mut left = m as u32 + 1;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < left {
                pos = next;
                left -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

/// One conditioning coordinate: the neighbours of a point form a contiguous
/// window of `k + 1` points in sorted order, which only ever moves right.
fn window_features(x: &[f64], y: &[f64], k: usize, kind: ContrastKind) -> Vec<f64> {
    let n = x.len();
    let perm = argsort(x);
    let xs: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
    let mut out = vec![0.0; n];

    match kind {
        ContrastKind::Squared => {
            let mut prefix = vec![0.0; n + 1];
            for (p, &i) in perm.iter().enumerate() {
                prefix[p + 1] = prefix[p] + y[i];
            }
            let mut l = 0;
            for p in 0..n {
                l = advance(&xs, l, p, k);
                out[perm[p]] = (prefix[l + k + 1] - prefix[l] - y[perm[p]]) / k as f64;
            }
        }
        ContrastKind::Pinball(alpha) => {
            let by_y = argsort(y);
            let mut rank = vec![0; n];
            for (r, &i) in by_y.iter().enumerate() {
                rank[i] = r;
            }
            let m = order_statistic_index(k, alpha);
            let mut counts = RankCounts::new(n);
            for &i in &perm[..=k] {
                counts.update(rank[i], true);
            }
            let mut l = 0;
            for p in 0..n {
                let next = advance(&xs, l, p, k);
                for s in l..next {
                    counts.update(rank[perm[s]], false);
                    counts.update(rank[perm[s + k + 1]], true);
                }
                l = next;
                let me = rank[perm[p]];
                counts.update(me, false);
                out[perm[p]] = y[by_y[counts.select(m)]];
                counts.update(me, true);
            }
        }
    }
    out
}

/// Smallest-distance window start for position `p`, starting the search at `l`.
fn advance(xs: &[f64], mut l: usize, p: usize, k: usize) -> usize {
    let n = xs.len();
    while l + k < p {
        l += 1;
    }
    while l < p && l + k + 1 < n && xs[l + k + 1] - xs[p] < xs[p] - xs[l] {
        l += 1;
    }
    l
}

// TODO: a spatial index would bring this below O(n^2) for multi-coordinate
// conditioning sets.
fn brute_force_features(inputs: &SampleMatrix, y: &[f64], cols: &[usize], k: usize, kind: ContrastKind) -> Vec<f64> {
    let n = inputs.rows();
    let q = cols.len();
    let mut z = vec![0.0; n * q];
    for (a, &c) in cols.iter().enumerate() {
        let col = inputs.column(c);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for (r, v) in col.iter().enumerate() {
            z[r * q + a] = (v - mean) * scale;
        }
    }
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    let mut local = Vec::with_capacity(k);
    let mut out = vec![0.0; n];
    for r in 0..n {
        let zr = &z[r * q..(r + 1) * q];
        dist.clear();
        dist.extend((0..n).filter(|&s| s != r).map(|s| {
            let d2: f64 = z[s * q..(s + 1) * q].iter().zip(zr).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, s)
        }));
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        local.clear();
        local.extend(dist[..k].iter().map(|&(_, s)| y[s]));
        out[r] = match kind {
            ContrastKind::Squared => local.iter().sum::<f64>() / k as f64,
            ContrastKind::Pinball(alpha) => {
                let m = order_statistic_index(k, alpha);
                *local.select_nth_unstable_by(m, f64::total_cmp).1
            }
        };
    }
    out
}
