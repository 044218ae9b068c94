use serde::{Deserialize, Serialize};

use super::matrix::{Category, Column, FeatureMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_CLUSTERS: usize = 20;

/// Groups of semantic columns whose means replace the raw components.
/// Fit on training rows only, then applied unchanged to any matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticReducer {
    /// Names of the raw columns the reducer reads.
    pub source: Vec<String>,
    /// Indices into `source`, one group per output column.
    pub clusters: Vec<Vec<usize>>,
}

fn standardized(col: &[f64]) -> Option<Vec<f64>> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (var > 0.0).then(|| col.iter().map(|x| (x - mean) / var.sqrt()).collect())
}

/// Ward agglomeration of columns (squared Euclidean distance between
/// standardized columns, Lance-Williams updates). Zero-variance columns are
/// left out of every group.
pub fn ward_clusters(columns: &[Vec<f64>], n_clusters: usize) -> Result<Vec<Vec<usize>>> {
    if n_clusters == 0 {
        return Err(Error::invalid("cluster count must be positive"));
    }
    let informative: Vec<(usize, Vec<f64>)> = columns
        .iter()
        .enumerate()
        .filter_map(|(j, c)| standardized(c).map(|z| (j, z)))
        .collect();
    let p = informative.len();
    if p == 0 {
        return Err(Error::invalid("no semantic column has positive variance"));
    }
    let target = if n_clusters > p {
        log::warn!("only {p} informative semantic columns; clamping clusters from {n_clusters} to {p}");
        p
    } else {
        n_clusters
    };
    let mut d = vec![0.0; p * p];
    for a in 0..p {
        for b in a + 1..p {
            let v: f64 = informative[a]
                .1
                .iter()
                .zip(&informative[b].1)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            d[a * p + b] = v;
            d[b * p + a] = v;
        }
    }
    let mut members: Vec<Vec<usize>> = (0..p).map(|a| vec![a]).collect();
    let mut active: Vec<usize> = (0..p).collect();
    while active.len() > target {
        let mut best = (f64::INFINITY, 0, 0);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                if d[a * p + b] < best.0 {
                    best = (d[a * p + b], a, b);
                }
            }
        }
        let (dij, i, j) = best;
        let (ni, nj) = (members[i].len() as f64, members[j].len() as f64);
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let nk = members[k].len() as f64;
            let v = ((ni + nk) * d[k * p + i] + (nj + nk) * d[k * p + j] - nk * dij) / (ni + nj + nk);
            d[k * p + i] = v;
            d[i * p + k] = v;
        }
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        active.retain(|&k| k != j);
    }
    let mut groups: Vec<Vec<usize>> = active
        .iter()
        .map(|&a| {
            let mut g: Vec<usize> = members[a].iter().map(|&m| informative[m].0).collect();
            g.sort_unstable();
            g
        })
        .collect();
    groups.sort();
    Ok(groups)
}

fn group_means(columns: &[&[f64]], clusters: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n = columns.first().map_or(0, |c| c.len());
    clusters
        .iter()
        .map(|g| {
            (0..n)
                .map(|r| g.iter().map(|&j| columns[j][r]).sum::<f64>() / g.len() as f64)
                .collect()
        })
        .collect()
}

/// Fits a reducer on `train` columns (m rows each) and returns the reduced
/// training columns: each output is the mean of its group's raw columns.
pub fn reduce_semantic(train: &[Vec<f64>], n_clusters: usize) -> Result<(SemanticReducer, Vec<Vec<f64>>)> {
    let clusters = ward_clusters(train, n_clusters)?;
    let refs: Vec<&[f64]> = train.iter().map(Vec::as_slice).collect();
    let reduced = group_means(&refs, &clusters);
    let reducer = SemanticReducer {
        source: (0..train.len()).map(|j| format!("sem_{j:03}")).collect(),
        clusters,
    };
    Ok((reducer, reduced))
}

impl SemanticReducer {
    /// Fits on the semantic columns of a (training) matrix.
    pub fn fit(train: &FeatureMatrix, n_clusters: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..train.n_cols()).filter(|&j| train.columns()[j].semantic).collect();
        if idx.is_empty() {
            return Err(Error::invalid("matrix has no semantic columns to reduce"));
        }
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| train.column(j).to_vec()).collect();
        Ok(Self {
            source: idx.iter().map(|&j| train.columns()[j].name.clone()).collect(),
            clusters: ward_clusters(&cols, n_clusters)?,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.clusters.len()
    }

    /// Replaces the raw semantic columns by the group means `semc_NN`.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let pos: Vec<usize> = self
            .source
            .iter()
            .map(|name| {
                matrix
                    .column_index(name)
                    .ok_or_else(|| Error::Schema(format!("semantic column `{name}` missing")))
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = pos.iter().map(|&j| matrix.column(j)).collect();
        let values = group_means(&refs, &self.clusters);
        let last = pos.iter().map(|&j| matrix.columns()[j].last_crawl).max().unwrap_or(0);
        let columns = (0..values.len())
            .map(|g| Column::new(format!("semc_{g:02}"), Category::SP, last))
            .collect();
        matrix
            .select_columns(|c| !c.semantic)
            .with_columns(columns, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identical_columns_share_a_cluster() {
        let a = noise(50, 1);
        let cols = vec![a.clone(), noise(50, 2), a, noise(50, 3)];
        let g = ward_clusters(&cols, 3).unwrap();
        assert!(g.contains(&vec![0, 2]));
    }

    #[test]
    fn as_many_clusters_as_columns_is_identity() {
        let cols: Vec<Vec<f64>> = (0..6).map(|s| noise(30, s)).collect();
        let (r, reduced) = reduce_semantic(&cols, 6).unwrap();
        assert_eq!(r.clusters, (0..6).map(|j| vec![j]).collect::<Vec<_>>());
        assert_eq!(reduced, cols);
    }

    #[test]
    fn planted_pairs_are_recovered() {
        let mut cols = Vec::new();
        for s in 0..3u64 {
            let base = noise(200, s);
            let jitter = noise(200, 100 + s);
            cols.push(base.clone());
            cols.push(base.iter().zip(&jitter).map(|(b, j)| b + 0.01 * j).collect());
        }
        let g = ward_clusters(&cols, 3).unwrap();
        assert_eq!(g, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
    }

    #[test]
    fn clamps_to_informative_columns() {
        let cols = vec![noise(10, 1), vec![3.0; 10], noise(10, 2)];
        let g = ward_clusters(&cols, 20).unwrap();
        assert_eq!(g, vec![vec![0], vec![2]]);
        assert!(ward_clusters(&[vec![1.0; 4]], 2).is_err());
    }

    #[test]
    fn fit_on_train_apply_to_test() {
        let sem: Vec<Column> = (0..4)
            .map(|j| Column::new(format!("sem_{j:03}"), Category::SP, 3).semantic())
            .collect();
        let mut cols = vec![Column::new("content_size", Category::SP, 3)];
        cols.extend(sem);
        let vals: Vec<Vec<f64>> = (0..5).map(|s| noise(40, s)).collect();
        let m = FeatureMatrix::new(cols, vals, (0..40).map(|i| i.to_string()).collect()).unwrap();
        let train = m.select_rows(&(0..30).collect::<Vec<_>>());
        let test = m.select_rows(&(30..40).collect::<Vec<_>>());
        let r = SemanticReducer::fit(&train, 2).unwrap();
        let out = r.apply(&test).unwrap();
        assert_eq!(out.names(), vec!["content_size", "semc_00", "semc_01"]);
        let g = &r.clusters[0];
        for row in 0..10 {
            let want = g.iter().map(|&j| test.get(row, j + 1)).sum::<f64>() / g.len() as f64;
            assert_eq!(out.get(row, 1), want);
        }
    }
}
