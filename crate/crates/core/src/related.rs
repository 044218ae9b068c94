//! Content-similarity neighborhoods: exact top-k cosine neighbors over
//! semantic vectors and similarity-weighted averages of neighbor values.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::snapshot::CrawlSeries;

pub const DEFAULT_K: usize = 30;
const WEIGHT_TOL: f64 = 1e-9;
/// Query rows per similarity block; bounds the block matrix to `BLOCK x n`.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub page: usize,
    /// Raw cosine similarity.
    pub similarity: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelatedPagesIndex {
    k: usize,
    reference_crawl: Option<usize>,
    neighbors: Vec<Vec<Neighbor>>,
}

fn weights_from(sims: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = sims.iter().map(|s| s.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total > 0.0 {
        clamped.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / sims.len() as f64; sims.len()]
    }
}

/// Indices of the `k` largest entries of `row` other than `skip`, by
/// descending value then ascending index.
fn top_k(row: &[f64], skip: usize, k: usize) -> Vec<usize> {
    let by_rank = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| j != skip).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, by_rank);
        idx.truncate(k);
    }
    idx.sort_by(by_rank);
    idx
}

impl RelatedPagesIndex {
    /// Exact brute-force index over unit vectors (cosine = dot product).
    /// `k` is clamped to `n - 1` with a warning.
    pub fn build<V: AsRef<[f64]> + Sync>(vectors: &[V], k: usize) -> Result<Self> {
        let n = vectors.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "related-page search needs at least 2 pages with vectors, got {n}"
            )));
        }
        if k == 0 {
            return Err(Error::invalid("neighbor count k must be positive"));
        }
        let d = vectors[0].as_ref().len();
        if d == 0 || vectors.iter().any(|v| v.as_ref().len() != d) {
            return Err(Error::invalid("semantic vectors must share one positive dimension"));
        }
        let k_eff = if k > n - 1 {
            log::warn!("only {n} pages with vectors; clamping k from {k} to {}", n - 1);
            n - 1
        } else {
            k
        };
        // rows of `m` are pages; column-major storage of m^T keeps each page contiguous
        let mt = DMatrix::from_fn(d, n, |r, c| vectors[c].as_ref()[r]);
        let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
        let blocks: Vec<Vec<Vec<Neighbor>>> = starts
            .par_iter()
            .map(|&start| {
                let end = (start + BLOCK).min(n);
                let q = mt.columns(start, end - start);
                // (n x d) * (d x b): column j holds similarities of query start+j
                let sims = mt.tr_mul(&q);
                (0..end - start)
                    .map(|j| {
                        let col = sims.column(j);
                        let row = col.as_slice();
                        let top = top_k(row, start + j, k_eff);
                        let raw: Vec<f64> = top.iter().map(|&p| row[p]).collect();
                        let w = weights_from(&raw);
                        top.iter()
                            .zip(raw.iter().zip(w))
                            .map(|(&page, (&similarity, weight))| Neighbor {
                                page,
                                similarity,
                                weight,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            k: k_eff,
            reference_crawl: None,
            neighbors: blocks.into_iter().flatten().collect(),
        })
    }

    /// Index over the semantic vectors of one crawl. Every page must have one.
    pub fn for_series(series: &CrawlSeries, crawl: usize, k: usize) -> Result<Self> {
        if crawl >= series.n_crawls() {
            return Err(Error::invalid(format!(
                "reference crawl {crawl} out of range (series has {})",
                series.n_crawls()
            )));
        }
        let mut vectors = Vec::with_capacity(series.n_pages());
        for (p, s) in series.crawl(crawl).iter().enumerate() {
            match &s.semantic_vector {
                Some(v) => vectors.push(v.clone()),
                None => {
                    return Err(Error::MissingData(format!(
                        "page {} has no semantic vector in crawl {crawl}",
                        series.pages()[p].url
                    )))
                }
            }
        }
        let mut idx = Self::build(&vectors, k)?;
        idx.reference_crawl = Some(crawl);
        Ok(idx)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn reference_crawl(&self) -> Option<usize> {
        self.reference_crawl
    }

    pub fn n_pages(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, page: usize) -> &[Neighbor] {
        &self.neighbors[page]
    }

    /// `sum_j w_j * value(neighbor_j)` for one page.
    pub fn average(&self, page: usize, value: impl Fn(usize) -> f64) -> f64 {
        self.neighbors[page]
            .iter()
            .map(|n| n.weight * value(n.page))
            .sum()
    }

    /// Writes `(url, neighbor_url, weight)` triples, one per line, tab separated.
    pub fn write_triples<W: Write>(&self, urls: &[&str], mut out: W) -> Result<()> {
        let io = |e| Error::io("<related index>", e);
        writeln!(out, "url\tneighbor_url\tweight").map_err(io)?;
        for (p, ns) in self.neighbors.iter().enumerate() {
            for n in ns {
                writeln!(out, "{}\t{}\t{:e}", urls[p], urls[n.page], n.weight).map_err(io)?;
            }
        }
        Ok(())
    }

    /// Reads triples written by [`write_triples`](Self::write_triples).
    /// Raw similarities are not stored in the triple format and read back as NaN.
    pub fn read_triples<R: BufRead>(urls: &[&str], input: R) -> Result<Self> {
        let pos: HashMap<&str, usize> = urls.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        let mut neighbors = vec![Vec::new(); urls.len()];
        for (ln, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<related index>", e))?;
            if ln == 0 || line.is_empty() {
                continue;
            }
            let ctx = || format!("related index line {}", ln + 1);
            let mut f = line.split('\t');
            let (Some(a), Some(b), Some(w), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(Error::parse(ctx(), "expected 3 tab-separated fields"));
            };
            let lookup = |u: &str| {
                pos.get(u)
                    .copied()
                    .ok_or_else(|| Error::parse(ctx(), format!("unknown url {u}")))
            };
            let weight: f64 = w.parse().map_err(|e| Error::parse(ctx(), e))?;
            neighbors[lookup(a)?].push(Neighbor {
                page: lookup(b)?,
                similarity: f64::NAN,
                weight,
            });
        }
        let k = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            k,
            reference_crawl: None,
            neighbors,
        })
    }
}

/// `sum_j w_j * v_j`.
pub fn weighted_average(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::invalid("weighted average of nothing"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum())
}

/// Weighted average of each page's neighbors' link change rates (one scope).
/// A NaN rate for any used neighbor is missing data.
pub fn neighbor_lcr(index: &RelatedPagesIndex, lcr: &[f64]) -> Result<Vec<f64>> {
    if lcr.len() != index.n_pages() {
        return Err(Error::MissingData(format!(
            "link change rates for {} pages, index covers {}",
            lcr.len(),
            index.n_pages()
        )));
    }
    (0..index.n_pages())
        .map(|p| {
            if let Some(n) = index.neighbors(p).iter().find(|n| lcr[n.page].is_nan()) {
                return Err(Error::MissingData(format!("no link change rate for neighbor page {}", n.page)));
            }
            Ok(index.average(p, |q| lcr[q]))
        })
        .collect()
}
