//! Quantile binning and second-order (gradient/hessian) tree growth on
//! binned features, shared by the histogram booster and NGBoost.

use serde::{Deserialize, Serialize};

use super::tree::Tree;

pub const MAX_BINS: usize = 255;

/// Per-feature bin edges. `bin(x)` is the first `i` with `x <= edges[i]`,
/// else `edges.len()`, so `bin(x) <= b` exactly when `x <= edges[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binner {
    pub edges: Vec<Vec<f64>>,
}

impl Binner {
    /// At most `max_bins` bins per feature: midpoints between distinct values
    /// when few, otherwise midpoints of evenly spaced quantiles.
    pub fn fit(cols: &[&[f64]], rows: &[usize], max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, MAX_BINS);
        let edges = cols
            .iter()
            .map(|col| {
                let mut v: Vec<f64> = rows.iter().map(|&r| col[r]).filter(|x| !x.is_nan()).collect();
                v.sort_by(f64::total_cmp);
                let mut distinct = v.clone();
                distinct.dedup();
                if distinct.len() <= max_bins {
                    return distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
                }
                let n = v.len();
                let mut e: Vec<f64> = (1..max_bins)
                    .map(|i| {
                        let pos = i as f64 * (n - 1) as f64 / max_bins as f64;
                        let (lo, frac) = (pos.floor() as usize, pos.fract());
                        let q = v[lo] + frac * (v[(lo + 1).min(n - 1)] - v[lo]);
                        // snap onto a midpoint so no training value sits on an edge
                        let k = distinct.partition_point(|&d| d <= q);
                        if k == 0 || k >= distinct.len() {
                            q
                        } else {
                            distinct[k - 1] + (distinct[k] - distinct[k - 1]) / 2.0
                        }
                    })
                    .collect();
                e.dedup();
                e
            })
            .collect();
        Self { edges }
    }

    pub fn bin(&self, feature: usize, x: f64) -> u8 {
        let e = &self.edges[feature];
        if x.is_nan() {
            return e.len() as u8;
        }
        e.partition_point(|&edge| edge < x) as u8
    }

    pub fn transform(&self, cols: &[&[f64]], n_rows: usize) -> Vec<Vec<u8>> {
        cols.iter()
            .enumerate()
            .map(|(f, col)| (0..n_rows).map(|r| self.bin(f, col[r])).collect())
            .collect()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowConfig {
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub min_hessian: f64,
}

#[derive(Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: u32,
}

fn score(g: f64, h: f64) -> f64 {
    if h > 0.0 {
        g * g / h
    } else {
        0.0
    }
}

/// Greedy depth-first growth maximizing `GL^2/HL + GR^2/HR - G^2/H`.
/// Leaves receive `leaf_value(G, H)`.
pub(crate) fn grow_hist_tree(
    binned: &[Vec<u8>],
    binner: &Binner,
    g: &[f64],
    h: &[f64],
    rows: Vec<usize>,
    cfg: &GrowConfig,
    leaf_value: &dyn Fn(f64, f64) -> f64,
) -> Tree {
    let n_features = binned.len();
    let mut tree = Tree::default();
    let root = tree.push_leaf(0.0, rows.len());
    let mut stack = vec![(root, rows, 0usize)];
    let mut hist = vec![Bin::default(); n_features * 256];
    let msl = cfg.min_samples_leaf.max(1);
    while let Some((node, rows, depth)) = stack.pop() {
        let (gt, ht) = rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + g[r], b + h[r]));
        tree.set_leaf_value(node, leaf_value(gt, ht));
        if rows.len() < 2 * msl || cfg.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        hist.iter_mut().for_each(|b| *b = Bin::default());
        for (f, col) in binned.iter().enumerate() {
            let hf = &mut hist[f * 256..(f + 1) * 256];
            for &r in &rows {
                let b = &mut hf[col[r] as usize];
                b.g += g[r];
                b.h += h[r];
                b.n += 1;
            }
        }
        let parent = score(gt, ht);
        let mut best: Option<(f64, usize, usize)> = None;
        for f in 0..n_features {
            let nb = binner.n_bins(f);
            let hf = &hist[f * 256..f * 256 + nb];
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            for (b, bin) in hf.iter().enumerate().take(nb - 1) {
                gl += bin.g;
                hl += bin.h;
                nl += bin.n as usize;
                let nr = rows.len() - nl;
                if nl < msl {
                    continue;
                }
                if nr < msl {
                    break;
                }
                let hr = ht - hl;
                if hl < cfg.min_hessian || hr < cfg.min_hessian {
                    continue;
                }
                let gain = score(gl, hl) + score(gt - gl, hr) - parent;
                if gain > 1e-12 * parent.abs().max(1e-300) && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, b));
                }
            }
        }
        let Some((_, f, b)) = best else { continue };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| (binned[f][r] as usize) <= b);
        tree.make_split(node, f, binner.edges[f][b]);
        let l = tree.push_leaf(0.0, l_rows.len());
        let r = tree.push_leaf(0.0, r_rows.len());
        tree.set_children(node, l, r);
        stack.push((r, r_rows, depth + 1));
        stack.push((l, l_rows, depth + 1));
    }
    tree
}
