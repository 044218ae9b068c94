//! Feature matrix assembly (static/dynamic, page/network), prediction
//! targets, semantic reduction and the look-back/look-around subset.
//!
//! For a target interval `T` (crawls `T` to `T + 1`) every feature reads
//! crawls `0..=T` only. Lag `j` refers to interval `T - j` for new-link
//! counts and to crawl `T - j` for snapshot quantities.

mod matrix;
mod reduce;
mod targets;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use matrix::{Category, Column, FeatureMatrix};
pub use reduce::{reduce_semantic, SemanticReducer, DEFAULT_CLUSTERS};
pub use targets::{compute_lcr, compute_nl, compute_nnl, target_vector, TargetKind, TargetVector};

use crate::error::{Error, Result};
use crate::related::RelatedPagesIndex;
use crate::snapshot::{url_depths, CrawlSeries, LinkHistory, LinkScope};

/// Scalar static-page columns, in emission order.
pub const SP_SCALARS: [&str; 7] = [
    "content_size",
    "text_size",
    "text_quality",
    "n_int_outlinks",
    "n_ext_outlinks",
    "url_path_depth",
    "url_domain_depth",
];
/// The first five scalars change between crawls and get lagged.
const DYNAMIC_SP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub categories: BTreeSet<Category>,
    /// Emit raw semantic components (to be reduced after the split).
    pub include_semantic: bool,
    /// Number of past intervals/crawls in the lag families.
    pub history: usize,
    /// Keep only look-back/look-around columns; needs categories within DP, DN.
    pub lbla_only: bool,
    /// Scope of the prediction target the matrix is built for.
    pub scope: LinkScope,
    /// Add PageRank next to TrustRank in the network families.
    pub include_pagerank: bool,
    /// Target interval; the last one when absent.
    pub target_interval: Option<usize>,
}

impl FeatureSpec {
    pub fn new(categories: &[Category], history: usize, scope: LinkScope) -> Self {
        Self {
            categories: categories.iter().copied().collect(),
            include_semantic: false,
            history,
            lbla_only: false,
            scope,
            include_pagerank: false,
            target_interval: None,
        }
    }

    /// All four categories.
    pub fn all(history: usize, scope: LinkScope) -> Self {
        Self::new(&Category::ALL, history, scope)
    }

    /// The look-back/look-around subset.
    pub fn lbla(history: usize, scope: LinkScope) -> Self {
        Self {
            lbla_only: true,
            ..Self::new(&[Category::DP, Category::DN], history, scope)
        }
    }

    /// Checks the spec against a series with `n_intervals` intervals and
    /// returns the resolved target interval.
    pub fn validate(&self, n_intervals: usize) -> Result<usize> {
        if self.categories.is_empty() {
            return Err(Error::invalid("feature spec selects no category"));
        }
        let t = self.target_interval.unwrap_or(n_intervals.saturating_sub(1));
        if n_intervals == 0 || t >= n_intervals {
            return Err(Error::invalid(format!(
                "target interval {t} outside a series with {n_intervals} intervals"
            )));
        }
        if self.history > t {
            return Err(Error::invalid(format!(
                "DP/DN lag families: history {} exceeds the {t} intervals before the target",
                self.history
            )));
        }
        if self.lbla_only && self.categories.iter().any(|c| matches!(c, Category::SP | Category::SN)) {
            return Err(Error::invalid("lbla_only allows only the DP and DN categories"));
        }
        Ok(t)
    }
}

struct Builder {
    columns: Vec<Column>,
    values: Vec<Vec<f64>>,
}

impl Builder {
    fn push(&mut self, col: Column, v: Vec<f64>) {
        self.columns.push(col);
        self.values.push(v);
    }
}

fn sp_scalars(series: &CrawlSeries, h: &LinkHistory, depths: &[[f64; 2]], crawl: usize, p: usize) -> [f64; 7] {
    let s = series.snapshot(crawl, p);
    [
        s.content_size as f64,
        s.text_size as f64,
        s.text_quality,
        h.outlink_count(p, crawl, LinkScope::Internal) as f64,
        h.outlink_count(p, crawl, LinkScope::External) as f64,
        depths[p][0],
        depths[p][1],
    ]
}

fn graph_value(series: &CrawlSeries, crawl: usize, p: usize, what: &str) -> Result<f64> {
    let s = series.snapshot(crawl, p);
    let v = match what {
        "inlinks_int" => s.inlinks.map(|i| i.internal as f64),
        "inlinks_ext" => s.inlinks.map(|i| i.external as f64),
        "trustrank" => s.trustrank,
        "pagerank" => s.pagerank,
        _ => unreachable!("unknown graph field"),
    };
    v.ok_or_else(|| {
        Error::MissingData(format!("{what} of {} at crawl {crawl}", series.pages()[p].url))
    })
}

/// Builds the feature matrix for `spec`. `index` is required for SN and DN.
pub fn assemble(
    series: &CrawlSeries,
    history: &LinkHistory,
    spec: &FeatureSpec,
    index: Option<&RelatedPagesIndex>,
) -> Result<FeatureMatrix> {
    let t = spec.validate(series.n_intervals())?;
    let n = series.n_pages();
    let hsize = spec.history;
    let wants = |c: Category| spec.categories.contains(&c);
    let needs_index = wants(Category::SN) || wants(Category::DN);
    let index = match (needs_index, index) {
        (true, None) => {
            return Err(Error::invalid("SN/DN features need a related-pages index"));
        }
        (true, Some(ix)) => {
            if ix.n_pages() != n {
                return Err(Error::invalid("related-pages index covers a different page set"));
            }
            if ix.reference_crawl().is_some_and(|c| c > t) {
                return Err(Error::invalid(format!(
                    "neighbor columns: index built on crawl {} after feature crawl {t}",
                    ix.reference_crawl().unwrap_or_default()
                )));
            }
            Some(ix)
        }
        (false, _) => None,
    };
    let graph_fields: Vec<&str> = if spec.include_pagerank {
        vec!["inlinks_int", "inlinks_ext", "trustrank", "pagerank"]
    } else {
        vec!["inlinks_int", "inlinks_ext", "trustrank"]
    };
    let depths: Vec<[f64; 2]> = series
        .pages()
        .iter()
        .map(|p| url_depths(&p.url).map(|d| [d.path_depth as f64, d.domain_depth as f64]))
        .collect::<Result<_>>()?;
    let sp_at = |crawl: usize| -> Vec<[f64; 7]> {
        (0..n).map(|p| sp_scalars(series, history, &depths, crawl, p)).collect()
    };
    let new_count = |p: usize, i: usize, s: LinkScope| history.new_count(p, i, s) as f64;
    let mut b = Builder {
        columns: Vec::new(),
        values: Vec::new(),
    };
    let sp_t = sp_at(t);

    if wants(Category::SP) {
        for (k, name) in SP_SCALARS.iter().enumerate() {
            b.push(Column::new(*name, Category::SP, t), sp_t.iter().map(|r| r[k]).collect());
        }
        if spec.include_semantic {
            let vecs: Vec<&[f64]> = (0..n)
                .map(|p| {
                    series.snapshot(t, p).semantic_vector.as_deref().ok_or_else(|| {
                        Error::MissingData(format!(
                            "semantic vector of {} at crawl {t}",
                            series.pages()[p].url
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let dim = vecs.first().map_or(0, |v| v.len());
            for d in 0..dim {
                b.push(
                    Column::new(format!("sem_{d:03}"), Category::SP, t).semantic(),
                    vecs.iter().map(|v| v[d]).collect(),
                );
            }
        }
    }

    if wants(Category::SN) {
        let ix = index.expect("checked above");
        for f in &graph_fields {
            let v = (0..n).map(|p| graph_value(series, t, p, f)).collect::<Result<_>>()?;
            b.push(Column::new(*f, Category::SN, t), v);
        }
        for (k, name) in SP_SCALARS.iter().enumerate() {
            b.push(
                Column::new(format!("nbr_{name}"), Category::SN, t),
                (0..n).map(|p| ix.average(p, |q| sp_t[q][k])).collect(),
            );
        }
    }

    if wants(Category::DP) {
        for s in LinkScope::BOTH {
            for j in 1..=hsize {
                b.push(
                    Column::new(format!("new_{}_lag{j}", s.tag()), Category::DP, t - j + 1)
                        .lbla()
                        .own_history(),
                    (0..n).map(|p| new_count(p, t - j, s)).collect(),
                );
            }
            if hsize > 0 {
                b.push(
                    Column::new(format!("new_{}_mean", s.tag()), Category::DP, t).lbla().own_history(),
                    (0..n)
                        .map(|p| (1..=hsize).map(|j| new_count(p, t - j, s)).sum::<f64>() / hsize as f64)
                        .collect(),
                );
            }
        }
        for j in 1..=hsize {
            let lagged = sp_at(t - j);
            for (k, name) in SP_SCALARS.iter().take(DYNAMIC_SP).enumerate() {
                b.push(
                    Column::new(format!("{name}_lag{j}"), Category::DP, t - j),
                    lagged.iter().map(|r| r[k]).collect(),
                );
            }
        }
    }

    if wants(Category::DN) {
        let ix = index.expect("checked above");
        for j in 1..=hsize {
            for f in &graph_fields {
                let v = (0..n).map(|p| graph_value(series, t - j, p, f)).collect::<Result<_>>()?;
                b.push(Column::new(format!("{f}_lag{j}"), Category::DN, t - j), v);
            }
        }
        // complete causal history: intervals 0..T, whatever the lag window
        if t > 0 {
            for s in LinkScope::BOTH {
                let lcr: Vec<f64> = (0..n)
                    .map(|p| compute_lcr(history, p, s, 0..t))
                    .collect::<Result<_>>()?;
                b.push(
                    Column::new(format!("nbr_lcr_{}", s.tag()), Category::DN, t).lbla(),
                    crate::related::neighbor_lcr(ix, &lcr)?,
                );
            }
        }
        for s in LinkScope::BOTH {
            for j in 1..=hsize {
                b.push(
                    Column::new(format!("nbr_new_{}_lag{j}", s.tag()), Category::DN, t - j + 1).lbla(),
                    (0..n).map(|p| ix.average(p, |q| new_count(q, t - j, s))).collect(),
                );
            }
            if hsize > 0 {
                b.push(
                    Column::new(format!("nbr_new_{}_mean", s.tag()), Category::DN, t).lbla(),
                    (0..n)
                        .map(|p| {
                            ix.average(p, |q| {
                                (1..=hsize).map(|j| new_count(q, t - j, s)).sum::<f64>() / hsize as f64
                            })
                        })
                        .collect(),
                );
            }
        }
    }

    let m = FeatureMatrix::new(
        b.columns,
        b.values,
        series.pages().iter().map(|p| p.url.clone()).collect(),
    )?;
    if spec.lbla_only {
        let kept = m.select_columns(|c| c.lbla);
        if kept.n_cols() == 0 {
            return Err(Error::invalid(
                "lbla_only with no history and no earlier intervals leaves no column",
            ));
        }
        return Ok(kept);
    }
    Ok(m)
}

/// Keeps the look-back/look-around columns; for rate targets also drops the
/// page's own new-link history, leaving only related-page information.
pub fn lbla_subset(matrix: &FeatureMatrix, target: TargetKind) -> Result<FeatureMatrix> {
    if !matrix.columns().iter().any(|c| c.lbla) {
        return Err(Error::invalid("matrix has no look-back/look-around columns"));
    }
    let out = matrix.select_columns(|c| c.lbla && !(target == TargetKind::Lcr && c.own_history));
    if out.n_cols() == 0 {
        return Err(Error::invalid("no related-page columns left for a rate target"));
    }
    Ok(out)
}

/// Drops the page's own new-link count columns. A rate target over the whole
/// history contains those intervals, so they are withheld from rate models.
pub fn without_own_history(matrix: &FeatureMatrix) -> FeatureMatrix {
    matrix.select_columns(|c| !c.own_history)
}

/// Checks that no column reads past crawl `target_interval`.
pub fn check_causality(matrix: &FeatureMatrix, target_interval: usize) -> Result<()> {
    match matrix.columns().iter().find(|c| c.last_crawl > target_interval) {
        Some(c) => Err(Error::invalid(format!(
            "column `{}` reads crawl {} at or after the target interval end",
            c.name, c.last_crawl
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::SeriesBuilder;
    use proptest::prelude::*;
    use std::sync::Arc;

    const A: &str = "https://a.org/";
    const B: &str = "https://b.org/x";
    const C: &str = "https://a.org/docs/y";

    /// 3 pages, 4 crawls: a gains internal links, b gains external ones.
    fn fixture() -> CrawlSeries {
        let vecs = [[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]];
        let mut b = SeriesBuilder::new(&[A, B, C], 4)
            .unwrap()
            .links(0, 0, &[B])
            .links(1, 0, &[B, C])
            .links(2, 0, &[B, C, "https://a.org/new1", "https://a.org/new2"])
            .links(3, 0, &[B, C, "https://a.org/new1", "https://a.org/new2", "https://a.org/new3"])
            .links(0, 1, &[A])
            .links(1, 1, &[A])
            .links(2, 1, &[A, "https://z.net/"])
            .links(3, 1, &[A, "https://z.net/"])
            .links_from(0, 2, &[A]);
        for c in 0..4 {
            for (p, v) in vecs.iter().enumerate() {
                b = b.with(c, p, |s| {
                    s.semantic_vector = Some(Arc::from(&v[..]));
                    s.content_size = 100 + (10 * c + p) as u64;
                });
            }
        }
        b.build().unwrap()
    }

    fn index(s: &CrawlSeries) -> RelatedPagesIndex {
        RelatedPagesIndex::for_series(s, 0, 2).unwrap()
    }

    fn col(m: &FeatureMatrix, name: &str) -> Vec<f64> {
        m.column(m.column_index(name).unwrap_or_else(|| panic!("no column {name}"))).to_vec()
    }

    #[test]
    fn targets_on_fixture() {
        let s = fixture();
        let h = s.link_history();
        // page a: new internal links in intervals 0 (c), 1 (new1, new2), 2 (new3)
        assert_eq!(compute_lcr(&h, 0, LinkScope::Internal, 0..3).unwrap(), 1.0);
        assert_eq!(compute_nnl(&h, 0, LinkScope::Internal, 1).unwrap(), 2);
        // page b: only the external z.net link in interval 1
        assert_eq!(compute_nl(&h, 1, LinkScope::Internal, 1).unwrap(), 0);
        assert_eq!(compute_nl(&h, 1, LinkScope::External, 1).unwrap(), 1);
        assert!((compute_lcr(&h, 1, LinkScope::External, 0..3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(compute_lcr(&h, 2, LinkScope::Internal, 0..3).unwrap(), 0.0);
        assert!(compute_lcr(&h, 0, LinkScope::Internal, 0..0).is_err());
        let tv = target_vector(&h, TargetKind::Lcr, LinkScope::Internal, 2).unwrap();
        assert_eq!(tv.intervals, 0..3);
        assert_eq!(tv.values, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn lcr_three_of_nine() {
        let mut b = SeriesBuilder::new(&[A], 10).unwrap();
        let mut links: Vec<String> = Vec::new();
        for c in 0..10 {
            if [2, 5, 9].contains(&c) {
                links.push(format!("https://a.org/l{c}"));
            }
            b = b.links(c, 0, &links);
        }
        let h = b.build().unwrap().link_history();
        let lcr = compute_lcr(&h, 0, LinkScope::Internal, 0..9).unwrap();
        assert!((lcr - 1.0 / 3.0).abs() < 1e-15);
        let nl_mean: f64 = (0..9).map(|i| compute_nl(&h, 0, LinkScope::Internal, i).unwrap() as f64).sum::<f64>() / 9.0;
        assert_eq!(lcr, nl_mean);
    }

    #[test]
    fn bursty_page_counts() {
        // one page, 8 crawls; 50 links appear in interval 2 only
        let burst: Vec<String> = (0..50).map(|i| format!("https://a.org/b{i}")).collect();
        let b = SeriesBuilder::new(&[A], 8).unwrap().links_from(3, 0, &burst);
        let s = b.build().unwrap();
        let h = s.link_history();
        for i in 0..7 {
            let direct = s.outlink_urls(i + 1, 0).difference(&s.outlink_urls(i, 0)).count() as u32;
            assert_eq!(compute_nnl(&h, 0, LinkScope::Internal, i).unwrap(), direct);
        }
        assert_eq!(compute_nnl(&h, 0, LinkScope::Internal, 2).unwrap(), 50);
    }

    #[test]
    fn every_column_matches_direct_recomputation() {
        let s = fixture();
        let h = s.link_history();
        let ix = index(&s);
        let mut spec = FeatureSpec::all(2, LinkScope::Internal);
        spec.include_pagerank = true;
        let m = assemble(&s, &h, &spec, Some(&ix)).unwrap();
        let t = 2;
        check_causality(&m, t).unwrap();
        for p in 0..3 {
            let snap = s.snapshot(t, p);
            assert_eq!(col(&m, "content_size")[p], snap.content_size as f64);
            assert_eq!(col(&m, "n_int_outlinks")[p], s.outlink_counts(t, p)[0] as f64);
            assert_eq!(col(&m, "n_ext_outlinks")[p], s.outlink_counts(t, p)[1] as f64);
            assert_eq!(col(&m, "trustrank")[p], snap.trustrank.unwrap());
            assert_eq!(col(&m, "pagerank")[p], snap.pagerank.unwrap());
            assert_eq!(col(&m, "inlinks_ext_lag2")[p], s.snapshot(0, p).inlinks.unwrap().external as f64);
            for j in 1..=2 {
                let (ni, ne) = s.new_outlink_ids(p, t - j);
                assert_eq!(col(&m, &format!("new_int_lag{j}"))[p], ni.len() as f64);
                assert_eq!(col(&m, &format!("new_ext_lag{j}"))[p], ne.len() as f64);
                assert_eq!(
                    col(&m, &format!("content_size_lag{j}"))[p],
                    s.snapshot(t - j, p).content_size as f64
                );
            }
            let mean = (col(&m, "new_int_lag1")[p] + col(&m, "new_int_lag2")[p]) / 2.0;
            assert_eq!(col(&m, "new_int_mean")[p], mean);
            // neighbor families against a direct weighted sum
            let ns = ix.neighbors(p);
            let wsum = |f: &dyn Fn(usize) -> f64| ns.iter().map(|n| n.weight * f(n.page)).sum::<f64>();
            let lcr_int = |q: usize| compute_lcr(&h, q, LinkScope::Internal, 0..t).unwrap();
            assert_eq!(col(&m, "nbr_lcr_int")[p], wsum(&lcr_int));
            assert_eq!(
                col(&m, "nbr_content_size")[p],
                wsum(&|q| s.snapshot(t, q).content_size as f64)
            );
            assert_eq!(
                col(&m, "nbr_new_ext_lag1")[p],
                wsum(&|q| s.new_outlink_ids(q, t - 1).1.len() as f64)
            );
        }
        assert_eq!(col(&m, "url_path_depth"), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn history_zero_has_no_lags() {
        let s = fixture();
        let h = s.link_history();
        let ix = index(&s);
        let m = assemble(&s, &h, &FeatureSpec::all(0, LinkScope::Internal), Some(&ix)).unwrap();
        assert!(m.names().iter().all(|n| !n.contains("lag") && !n.contains("mean")));
        assert!(m.column_index("nbr_lcr_int").is_some());
        let sp = assemble(&s, &h, &FeatureSpec::new(&[Category::SP], 0, LinkScope::Internal), None).unwrap();
        assert_eq!(sp.names(), SP_SCALARS.to_vec());
    }

    #[test]
    fn static_page_has_zero_dynamics() {
        let s = SeriesBuilder::new(&[A, B, C], 5)
            .unwrap()
            .links_from(0, 0, &[B, C])
            .links_from(0, 1, &[A])
            .build()
            .unwrap();
        let m = assemble(&s, &s.link_history(), &FeatureSpec::new(&[Category::DP], 3, LinkScope::Internal), None).unwrap();
        for c in m.columns().iter().filter(|c| c.own_history) {
            assert!(m.column(m.column_index(&c.name).unwrap()).iter().all(|&x| x == 0.0));
        }
        assert!(m.column_index("new_int_mean").is_some());
    }

    #[test]
    fn spec_errors() {
        let s = fixture();
        let h = s.link_history();
        let too_long = FeatureSpec::all(3, LinkScope::Internal);
        let e = assemble(&s, &h, &too_long, Some(&index(&s))).unwrap_err();
        assert!(e.to_string().contains("DP/DN"));
        let mut bad = FeatureSpec::lbla(1, LinkScope::Internal);
        bad.categories.insert(Category::SP);
        assert!(bad.validate(3).is_err());
        assert!(assemble(&s, &h, &FeatureSpec::all(1, LinkScope::Internal), None).is_err());
    }

    #[test]
    fn lbla_subsets() {
        let s = fixture();
        let h = s.link_history();
        let ix = index(&s);
        let sp = assemble(&s, &h, &FeatureSpec::new(&[Category::SP], 0, LinkScope::Internal), None).unwrap();
        assert!(lbla_subset(&sp, TargetKind::Nnl).is_err());
        let full = assemble(&s, &h, &FeatureSpec::all(2, LinkScope::Internal), Some(&ix)).unwrap();
        let nnl = lbla_subset(&full, TargetKind::Nnl).unwrap();
        assert!(nnl.column_index("new_int_lag1").is_some());
        assert!(nnl.column_index("nbr_new_int_lag1").is_some());
        assert!(nnl.column_index("nbr_lcr_ext").is_some());
        assert!(nnl.column_index("trustrank").is_none());
        let lcr = lbla_subset(&full, TargetKind::Lcr).unwrap();
        assert!(lcr.columns().iter().all(|c| !c.own_history));
        assert!(lcr.column_index("nbr_new_ext_mean").is_some());
        // lbla_only spec agrees with the subset
        let direct = assemble(&s, &h, &FeatureSpec::lbla(2, LinkScope::Internal), Some(&ix)).unwrap();
        assert_eq!(direct.names(), nnl.names());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lcr_is_mean_nl_and_nnl_dominates(counts in prop::collection::vec(0usize..4, 2..8)) {
            let n = counts.len() + 1;
            let mut b = SeriesBuilder::new(&[A], n).unwrap();
            let mut links: Vec<String> = Vec::new();
            let mut next = 0;
            for c in 0..n {
                if c > 0 {
                    for _ in 0..counts[c - 1] {
                        links.push(format!("https://a.org/p{next}"));
                        next += 1;
                    }
                }
                b = b.links(c, 0, &links);
            }
            let h = b.build_raw().unwrap().link_history();
            let sc = LinkScope::Internal;
            let lcr = compute_lcr(&h, 0, sc, 0..n - 1).unwrap();
            let nls: Vec<u8> = (0..n - 1).map(|i| compute_nl(&h, 0, sc, i).unwrap()).collect();
            let mean = nls.iter().map(|&x| x as f64).sum::<f64>() / (n - 1) as f64;
            prop_assert!((lcr - mean).abs() < 1e-15);
            for i in 0..n - 1 {
                prop_assert!(compute_nnl(&h, 0, sc, i).unwrap() >= nls[i] as u32);
                prop_assert_eq!(compute_nnl(&h, 0, sc, i).unwrap() as usize, counts[i]);
            }
        }
    }
}
