use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

/// 1-based ranks in ascending order; tied values share their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks. None when either side is constant.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("Spearman's rho needs at least 2 observations"));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Precision@k% for k = 1..=100 and the normalized area under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    /// `precision[k - 1]` is the mean fraction of the true top-k% found in
    /// the predicted top-k%.
    pub precision: Vec<f64>,
    pub area: f64,
}

impl PrecisionCurve {
    pub fn at(&self, k_percent: usize) -> f64 {
        self.precision[k_percent - 1]
    }
}

/// Number of items in the top `k` percent of `n`.
pub fn top_count(n: usize, k_percent: usize) -> usize {
    (k_percent * n).div_ceil(100).max(1).min(n)
}

/// Positions sorted by descending score; ties broken by `keys`.
pub(crate) fn order_by(scores: &[f64], keys: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(keys[a].cmp(&keys[b])));
    idx
}

/// Curve for fixed total orders of both sides.
pub fn precision_curve_from_orders(truth_order: &[usize], pred_order: &[usize]) -> Vec<f64> {
    let n = truth_order.len();
    // position of each item in the predicted order
    let mut pred_pos = vec![0usize; n];
    for (i, &p) in pred_order.iter().enumerate() {
        pred_pos[p] = i;
    }
    (1..=100)
        .map(|k| {
            let m = top_count(n, k);
            let hits = truth_order[..m].iter().filter(|&&t| pred_pos[t] < m).count();
            hits as f64 / m as f64
        })
        .collect()
}

/// Trapezoidal area over k in [0, 1], the curve held flat below k = 1%; a
/// perfect ranking scores 1 and a random one about 0.5.
pub fn curve_area(precision: &[f64]) -> f64 {
    let step = 0.01;
    let mut area = step * precision[0];
    for w in precision.windows(2) {
        area += step * (w[0] + w[1]) / 2.0;
    }
    area
}

/// Precision@k% of a predicted ranking against the ground truth. In each
/// realization ties on both sides are broken by independent random keys;
/// the curve is averaged over realizations.
pub fn precision_at_k_curve(truth: &[f64], predicted: &[f64], n_realizations: usize, seed: u64) -> Result<PrecisionCurve> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("no pages to rank".into()));
    }
    if n_realizations == 0 {
        return Err(Error::invalid("at least one tie-breaking realization is needed"));
    }
    let n = truth.len();
    let mut sum = vec![0.0; 100];
    for r in 0..n_realizations {
        let mut g = rng(derive_seed(seed, r as u64));
        let tk: Vec<u64> = (0..n).map(|_| g.random()).collect();
        let pk: Vec<u64> = (0..n).map(|_| g.random()).collect();
        let curve = precision_curve_from_orders(&order_by(truth, &tk), &order_by(predicted, &pk));
        for (s, c) in sum.iter_mut().zip(curve) {
            *s += c;
        }
    }
    let precision: Vec<f64> = sum.iter().map(|s| s / n_realizations as f64).collect();
    let area = curve_area(&precision);
    Ok(PrecisionCurve { precision, area })
}
