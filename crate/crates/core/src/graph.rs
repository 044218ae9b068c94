//! Per-snapshot graph computations: inlink counts, PageRank and TrustRank.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::{CrawlSeries, InlinkCounts, LinkScope};

/// Directed link graph of one crawl restricted to in-series pages (CSR layout).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    scopes: Vec<LinkScope>,
    out_of_series: Vec<u32>,
}

impl SnapshotGraph {
    /// Builds a graph from `(source, target, scope)` triples; duplicates are dropped.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, LinkScope)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, LinkScope)> = edges.to_vec();
        if let Some(&(s, t, _)) = sorted.iter().find(|(s, t, _)| *s >= n_nodes || *t >= n_nodes) {
            return Err(Error::invalid(format!("edge {s}->{t} outside {n_nodes} nodes")));
        }
        sorted.sort_by_key(|&(s, t, _)| (s, t));
        sorted.dedup_by_key(|&mut (s, t, _)| (s, t));
        let mut offsets = vec![0usize; n_nodes + 1];
        for &(s, _, _) in &sorted {
            offsets[s + 1] += 1;
        }
        for i in 0..n_nodes {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            offsets,
            targets: sorted.iter().map(|&(_, t, _)| t as u32).collect(),
            scopes: sorted.iter().map(|&(_, _, sc)| sc).collect(),
            out_of_series: vec![0; n_nodes],
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Outlinks of `node` whose targets are not in the series.
    pub fn out_of_series_count(&self, node: usize) -> u32 {
        self.out_of_series[node]
    }

    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = (usize, LinkScope)> + '_ {
        let r = self.offsets[node]..self.offsets[node + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.scopes[r])
            .map(|(&t, &s)| (t as usize, s))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, LinkScope)> + '_ {
        (0..self.n_nodes()).flat_map(move |s| self.out_edges(s).map(move |(t, sc)| (s, t, sc)))
    }
}

/// Graph of crawl `crawl`: an edge `p -> q` exists iff `q` is an in-series
/// outlink of `p`. Out-of-series outlinks are only counted.
pub fn build_graph(series: &CrawlSeries, crawl: usize) -> SnapshotGraph {
    let n = series.n_pages();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut targets = Vec::new();
    let mut scopes = Vec::new();
    let mut out_of_series = vec![0u32; n];
    for (p, snap) in series.crawl(crawl).iter().enumerate() {
        let mut row: Vec<u32> = Vec::new();
        for &l in &snap.outlinks {
            match series.page_of_link(l) {
                Some(q) => row.push(q as u32),
                None => out_of_series[p] += 1,
            }
        }
        row.sort_unstable();
        row.dedup();
        for &q in &row {
            scopes.push(series.scope_of(p, series.page_link(q as usize)));
        }
        targets.extend(row);
        offsets.push(targets.len());
    }
    SnapshotGraph {
        offsets,
        targets,
        scopes,
        out_of_series,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// A probability distribution over pages plus the iteration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub damping: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl ScoreVector {
    /// Two-column `url<TAB>score` export.
    pub fn write_tsv<W: Write>(&self, urls: &[&str], mut out: W) -> std::io::Result<()> {
        writeln!(out, "url\tscore")?;
        for (u, s) in urls.iter().zip(&self.scores) {
            writeln!(out, "{u}\t{s}")?;
        }
        Ok(())
    }
}

fn random_walk(
    graph: &SnapshotGraph,
    restart: &[f64],
    params: &RankParams,
    what: &'static str,
) -> Result<ScoreVector> {
    let n = graph.n_nodes();
    if n == 0 {
        return Err(Error::invalid("graph has no nodes"));
    }
    if !(0.0..=1.0).contains(&params.damping) {
        return Err(Error::invalid(format!("damping {} outside [0, 1]", params.damping)));
    }
    let d = params.damping;
    let mut x = restart.to_vec();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=params.max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut dangling = 0.0;
        for (s, &mass) in x.iter().enumerate() {
            let deg = graph.out_degree(s);
            if deg == 0 {
                dangling += mass;
                continue;
            }
            let share = mass / deg as f64;
            for (t, _) in graph.out_edges(s) {
                next[t] += share;
            }
        }
        for (v, &r) in next.iter_mut().zip(restart) {
            *v = d * (*v + dangling * r) + (1.0 - d) * r;
        }
        residual = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual < params.tol {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
            return Ok(ScoreVector {
                scores: x,
                damping: d,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        what,
        iterations: params.max_iter,
        residual,
    })
}

/// PageRank by power iteration; dangling mass restarts uniformly.
pub fn pagerank(graph: &SnapshotGraph, params: &RankParams) -> Result<ScoreVector> {
    let n = graph.n_nodes();
    let restart = vec![1.0 / n.max(1) as f64; n];
    random_walk(graph, &restart, params, "PageRank")
}

/// PageRank with restart (and dangling mass) spread uniformly over `trusted`.
pub fn trustrank(
    graph: &SnapshotGraph,
    trusted: &[usize],
    params: &RankParams,
) -> Result<ScoreVector> {
    let n = graph.n_nodes();
    let mut restart = vec![0.0; n];
    for &t in trusted {
        if t >= n {
            return Err(Error::invalid(format!("trusted page {t} outside graph")));
        }
        restart[t] = 1.0;
    }
    let k = restart.iter().filter(|&&r| r > 0.0).count();
    if k == 0 {
        return Err(Error::invalid("trusted set is empty"));
    }
    restart.iter_mut().for_each(|r| *r /= k as f64);
    random_walk(graph, &restart, params, "TrustRank")
}

/// Per-page in-edge counts split by scope.
pub fn inlink_counts(graph: &SnapshotGraph) -> Vec<InlinkCounts> {
    let mut counts = vec![InlinkCounts::default(); graph.n_nodes()];
    for (_, t, scope) in graph.edges() {
        match scope {
            LinkScope::Internal => counts[t].internal += 1,
            LinkScope::External => counts[t].external += 1,
        }
    }
    counts
}

/// Fallback trusted set: the top 1% of pages by internal inlinks (at least one).
pub fn default_trusted_set(inlinks: &[InlinkCounts]) -> Vec<usize> {
    let k = (inlinks.len() / 100).max(1).min(inlinks.len());
    let mut order: Vec<usize> = (0..inlinks.len()).collect();
    order.sort_by(|&a, &b| inlinks[b].internal.cmp(&inlinks[a].internal).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}
