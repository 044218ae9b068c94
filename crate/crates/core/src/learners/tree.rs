//! Binary decision trees in flat arrays, and extremely randomized growth.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const LEAF: i32 = -1;

/// Flat node arrays; children always follow their parent. Internal node `i` sends `x[feature] <= threshold` to
/// `left[i]` and everything else (NaN included) to `right[i]`; for leaves
/// `value` holds the prediction (a class-1 probability for classifiers).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    feature: Vec<i32>,
    value: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    n_samples: Vec<u32>,
}

impl Tree {
    pub(crate) fn push_leaf(&mut self, value: f64, n: usize) -> usize {
        self.feature.push(LEAF);
        self.value.push(value);
        self.left.push(0);
        self.right.push(0);
        self.n_samples.push(n as u32);
        self.feature.len() - 1
    }

    /// Turns leaf `node` into a split; children are attached later.
    pub(crate) fn make_split(&mut self, node: usize, feature: usize, threshold: f64) {
        self.feature[node] = feature as i32;
        self.value[node] = threshold;
    }

    pub(crate) fn set_children(&mut self, node: usize, left: usize, right: usize) {
        self.left[node] = left as u32;
        self.right[node] = right as u32;
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, value: f64) {
        self.value[node] = value;
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f == LEAF).count()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] == LEAF
    }

    /// `(feature, threshold)` of an internal node.
    pub fn split(&self, node: usize) -> Option<(usize, f64)> {
        (!self.is_leaf(node)).then(|| (self.feature[node] as usize, self.value[node]))
    }

    pub fn children(&self, node: usize) -> (usize, usize) {
        (self.left[node] as usize, self.right[node] as usize)
    }

    pub fn leaf_value(&self, node: usize) -> f64 {
        self.value[node]
    }

    /// Training rows that reached `node`.
    pub fn node_samples(&self, node: usize) -> usize {
        self.n_samples[node] as usize
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.feature.contains(&(j as i32))
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            if t.is_leaf(n) {
                0
            } else {
                let (l, r) = t.children(n);
                1 + go(t, l).max(go(t, r))
            }
        }
        if self.n_nodes() == 0 {
            0
        } else {
            go(self, 0)
        }
    }

    /// Leaf reached by a row given as a feature accessor.
    pub fn leaf_of(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut n = 0;
        while self.feature[n] != LEAF {
            let f = self.feature[n] as usize;
            n = if x(f) <= self.value[n] {
                self.left[n] as usize
            } else {
                self.right[n] as usize
            };
        }
        n
    }

    pub fn predict(&self, x: impl Fn(usize) -> f64) -> f64 {
        self.value[self.leaf_of(x)]
    }

    /// Predictions for every row of column-major data.
    pub fn predict_columns(&self, cols: &[&[f64]], n_rows: usize) -> Vec<f64> {
        (0..n_rows).map(|r| self.predict(|f| cols[f][r])).collect()
    }

    pub fn is_well_formed(&self, min_samples_leaf: usize) -> bool {
        (0..self.n_nodes()).all(|n| {
            if self.is_leaf(n) {
                self.node_samples(n) >= min_samples_leaf
            } else {
                let (l, r) = self.children(n);
                self.value[n].is_finite() && l > n && r > n && l < self.n_nodes() && r < self.n_nodes()
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ExtraConfig {
    pub min_samples_leaf: usize,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub classification: bool,
}

/// Weighted sufficient statistics of a node: `(w, w*y, w*y^2)`.
#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    wy: f64,
    wyy: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
        self.n += 1;
    }

    fn sub(&self, o: &Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            wy: self.wy - o.wy,
            wyy: self.wyy - o.wyy,
            n: self.n - o.n,
        }
    }

    /// Weighted impurity times weight: SSE for regression, `W * gini` for
    /// binary classification (with `wy` the class-1 weight).
    fn impurity(&self, classification: bool) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        if classification {
            let w1 = self.wy;
            let w0 = self.w - w1;
            self.w - (w1 * w1 + w0 * w0) / self.w
        } else {
            (self.wyy - self.wy * self.wy / self.w).max(0.0)
        }
    }

    fn mean(&self) -> f64 {
        if self.w > 0.0 {
            self.wy / self.w
        } else {
            0.0
        }
    }
}

/// Grows one extremely randomized tree on `rows`: at each node up to
/// `max_features` non-constant candidate features each get one uniform random
/// threshold in their node range, and the best-scoring admissible one splits.
pub(crate) fn grow_extra_tree(
    cols: &[&[f64]],
    y: &[f64],
    w: &[f64],
    rows: Vec<usize>,
    cfg: &ExtraConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut tree = Tree::default();
    let n_features = cols.len();
    let mut feats: Vec<usize> = (0..n_features).collect();
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    let root_stats = node_stats(&rows, y, w);
    let root = tree.push_leaf(root_stats.mean(), rows.len());
    stack.push((root, rows, 0));
    while let Some((node, rows, depth)) = stack.pop() {
        let stats = node_stats(&rows, y, w);
        tree.set_leaf_value(node, stats.mean());
        let msl = cfg.min_samples_leaf.max(1);
        let pure = stats.impurity(cfg.classification) <= 1e-12 * stats.w.max(1.0);
        if rows.len() < 2 * msl || pure || cfg.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        feats.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        for &f in feats.iter() {
            if tried >= cfg.max_features {
                break;
            }
            let col = cols[f];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in &rows {
                let v = col[r];
                if v < lo {
                    lo = v;
                }
                if v > hi {
                    hi = v;
                }
            }
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                continue;
            }
            tried += 1;
            let thr = rng.random_range(lo..hi);
            let mut left = Stats::default();
            for &r in &rows {
                if col[r] <= thr {
                    left.add(w[r], y[r]);
                }
            }
            let right = stats.sub(&left);
            if left.n < msl || right.n < msl {
                continue;
            }
            let gain = stats.impurity(cfg.classification)
                - left.impurity(cfg.classification)
                - right.impurity(cfg.classification);
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, thr));
            }
        }
        let Some((_, f, thr)) = best else { continue };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| cols[f][r] <= thr);
        tree.make_split(node, f, thr);
        let l = tree.push_leaf(0.0, l_rows.len());
        let r = tree.push_leaf(0.0, r_rows.len());
        tree.set_children(node, l, r);
        stack.push((r, r_rows, depth + 1));
        stack.push((l, l_rows, depth + 1));
    }
    tree
}

fn node_stats(rows: &[usize], y: &[f64], w: &[f64]) -> Stats {
    let mut s = Stats::default();
    for &r in rows {
        s.add(w[r], y[r]);
    }
    s
}
