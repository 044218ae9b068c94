//! Crawl snapshot data model and the elementary link computations.
//!
//! A [`CrawlSeries`] holds `n` aligned snapshots of the same page set. Outlink
//! URLs are interned in a [`UrlTable`] so that consecutive snapshots can be
//! diffed as sorted id lists and link scope reduces to an origin-id comparison.
//! Crawls are indexed `0..n`; interval `i` spans crawls `i` and `i + 1`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};

/// Dimension of the semantic page embedding.
pub const SEMANTIC_DIM: usize = 192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkScope {
    Internal,
    External,
}

impl LinkScope {
    pub const BOTH: [LinkScope; 2] = [LinkScope::Internal, LinkScope::External];

    pub fn index(self) -> usize {
        match self {
            LinkScope::Internal => 0,
            LinkScope::External => 1,
        }
    }

    /// Short tag used in column and file names.
    pub fn tag(self) -> &'static str {
        match self {
            LinkScope::Internal => "int",
            LinkScope::External => "ext",
        }
    }
}

impl fmt::Display for LinkScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkScope::Internal => "internal",
            LinkScope::External => "external",
        })
    }
}

impl std::str::FromStr for LinkScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "internal" | "int" => Ok(LinkScope::Internal),
            "external" | "ext" => Ok(LinkScope::External),
            other => Err(Error::invalid(format!("unknown link scope `{other}`"))),
        }
    }
}

fn parse_absolute(raw: &str) -> Result<Url> {
    let url = Url::parse(raw.trim()).map_err(|e| Error::MalformedUrl {
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    if url.host_str().is_none_or(str::is_empty) {
        return Err(Error::MalformedUrl {
            url: raw.to_string(),
            reason: "no host".into(),
        });
    }
    Ok(url)
}

fn host_of(url: &Url) -> String {
    url.host_str().unwrap_or_default().to_ascii_lowercase()
}

/// Canonical string form used for outlink set comparison.
///
/// Drops the fragment, credentials and any trailing slash of the path; keeps
/// the query string. The host is lower-cased.
pub fn canonical_url(raw: &str) -> Result<String> {
    let url = parse_absolute(raw)?;
    let mut out = String::with_capacity(raw.len());
    out.push_str(url.scheme());
    out.push_str("://");
    out.push_str(&host_of(&url));
    if let Some(port) = url.port() {
        out.push(':');
        out.push_str(&port.to_string());
    }
    out.push_str(url.path().trim_end_matches('/'));
    if let Some(q) = url.query() {
        out.push('?');
        out.push_str(q);
    }
    Ok(out)
}

/// Scope of the link `source -> target`.
///
/// Internal iff the scheme and the full host (case-insensitive) both match.
pub fn classify_link(source_url: &str, target_url: &str) -> Result<LinkScope> {
    let s = parse_absolute(source_url)?;
    let t = parse_absolute(target_url)?;
    if s.scheme() == t.scheme() && host_of(&s) == host_of(&t) {
        Ok(LinkScope::Internal)
    } else {
        Ok(LinkScope::External)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlDepths {
    pub path_depth: usize,
    pub domain_depth: usize,
}

/// Path depth (non-empty path segments) and domain depth (host labels).
///
/// A missing scheme is tolerated, so `domain.com/en/news/` parses.
pub fn url_depths(raw: &str) -> Result<UrlDepths> {
    let url = if raw.contains("://") {
        parse_absolute(raw)?
    } else {
        parse_absolute(&format!("http://{raw}")).map_err(|_| Error::MalformedUrl {
            url: raw.to_string(),
            reason: "cannot parse as host/path".into(),
        })?
    };
    let path_depth = url.path().split('/').filter(|s| !s.is_empty()).count();
    let domain_depth = host_of(&url).split('.').filter(|s| !s.is_empty()).count();
    Ok(UrlDepths {
        path_depth,
        domain_depth,
    })
}

/// New outlinks of one page between two consecutive crawls, split by scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NewOutlinks {
    pub internal: BTreeSet<String>,
    pub external: BTreeSet<String>,
}

impl NewOutlinks {
    pub fn count(&self, scope: LinkScope) -> usize {
        match scope {
            LinkScope::Internal => self.internal.len(),
            LinkScope::External => self.external.len(),
        }
    }
}

/// `curr \ prev` partitioned by [`classify_link`] relative to `source_url`.
///
/// Both sets are compared after [`canonical_url`] normalization.
pub fn new_outlinks(
    prev: &BTreeSet<String>,
    curr: &BTreeSet<String>,
    source_url: &str,
) -> Result<NewOutlinks> {
    let prev: BTreeSet<String> = prev.iter().map(|u| canonical_url(u)).collect::<Result<_>>()?;
    let mut out = NewOutlinks::default();
    for raw in curr {
        let c = canonical_url(raw)?;
        if prev.contains(&c) {
            continue;
        }
        match classify_link(source_url, &c)? {
            LinkScope::Internal => out.internal.insert(c),
            LinkScope::External => out.external.insert(c),
        };
    }
    Ok(out)
}

/// True iff the two content digests differ byte-for-byte.
pub fn content_changed(digest_prev: &[u8], digest_curr: &[u8]) -> Result<bool> {
    if digest_prev.is_empty() || digest_curr.is_empty() {
        return Err(Error::MissingData("empty content digest".into()));
    }
    Ok(digest_prev != digest_curr)
}

/// Interned URL handle, valid within one [`UrlTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub u32);

/// Interner for canonical URLs. Each URL also gets an origin id, where the
/// origin is the `(scheme, host)` pair; two URLs share an origin iff a link
/// between them is internal.
#[derive(Debug, Clone, Default)]
pub struct UrlTable {
    urls: Vec<String>,
    origin_of: Vec<u32>,
    lookup: HashMap<String, LinkId>,
    origins: HashMap<(String, String), u32>,
}

impl UrlTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns an already-canonical URL.
    pub fn intern_canonical(&mut self, canonical: &str) -> Result<LinkId> {
        if let Some(&id) = self.lookup.get(canonical) {
            return Ok(id);
        }
        let parsed = parse_absolute(canonical)?;
        let key = (parsed.scheme().to_string(), host_of(&parsed));
        let next_origin = self.origins.len() as u32;
        let origin = *self.origins.entry(key).or_insert(next_origin);
        let id = LinkId(self.urls.len() as u32);
        self.urls.push(canonical.to_string());
        self.origin_of.push(origin);
        self.lookup.insert(canonical.to_string(), id);
        Ok(id)
    }

    /// Canonicalizes and interns.
    pub fn intern(&mut self, raw: &str) -> Result<LinkId> {
        let c = canonical_url(raw)?;
        self.intern_canonical(&c)
    }

    pub fn get(&self, canonical: &str) -> Option<LinkId> {
        self.lookup.get(canonical).copied()
    }

    pub fn url(&self, id: LinkId) -> &str {
        &self.urls[id.0 as usize]
    }

    pub fn origin(&self, id: LinkId) -> u32 {
        self.origin_of[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageId {
    pub id: usize,
    pub url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InlinkCounts {
    pub internal: u32,
    pub external: u32,
}

impl InlinkCounts {
    pub fn get(&self, scope: LinkScope) -> u32 {
        match scope {
            LinkScope::Internal => self.internal,
            LinkScope::External => self.external,
        }
    }
}

/// One page at one crawl time.
#[derive(Debug, Clone, PartialEq)]
pub struct PageSnapshot {
    pub fetch_time: DateTime<Utc>,
    /// Sorted, duplicate-free outlink ids.
    pub outlinks: Vec<LinkId>,
    pub inlinks: Option<InlinkCounts>,
    pub content_digest: Vec<u8>,
    pub content_size: u64,
    pub text_size: u64,
    pub text_quality: f64,
    pub semantic_vector: Option<Arc<[f64]>>,
    pub pagerank: Option<f64>,
    pub trustrank: Option<f64>,
}

impl PageSnapshot {
    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.content_size < 1 {
            return Err("content_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.text_quality) {
            return Err(format!("text_quality {} outside [0, 1]", self.text_quality));
        }
        if self.content_digest.is_empty() {
            return Err("empty content digest".into());
        }
        if self.outlinks.windows(2).any(|w| w[0] >= w[1]) {
            return Err("outlinks not a sorted set".into());
        }
        if let Some(v) = &self.semantic_vector {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(format!("semantic vector norm {norm} is not 1"));
            }
        }
        for (name, score) in [("pagerank", self.pagerank), ("trustrank", self.trustrank)] {
            if let Some(s) = score {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(format!("{name} {s} is negative or non-finite"));
                }
            }
        }
        Ok(())
    }
}

/// Aligned snapshots of one page set over `n >= 2` crawl times.
#[derive(Debug, Clone)]
pub struct CrawlSeries {
    pages: Vec<PageId>,
    crawl_times: Vec<DateTime<Utc>>,
    /// `snapshots[crawl][page]`.
    snapshots: Vec<Vec<PageSnapshot>>,
    urls: UrlTable,
    page_links: Vec<LinkId>,
    link_pages: HashMap<LinkId, usize>,
    digest_algorithm: String,
}

impl PartialEq for CrawlSeries {
    fn eq(&self, other: &Self) -> bool {
        if self.pages != other.pages
            || self.crawl_times != other.crawl_times
            || self.digest_algorithm != other.digest_algorithm
        {
            return false;
        }
        // Link ids are table-local, so compare outlinks by URL.
        self.snapshots.iter().zip(&other.snapshots).all(|(a, b)| {
            a.iter().zip(b).all(|(x, y)| {
                let xs: Vec<&str> = x.outlinks.iter().map(|&l| self.urls.url(l)).collect();
                let ys: Vec<&str> = y.outlinks.iter().map(|&l| other.urls.url(l)).collect();
                let mut xs_sorted = xs.clone();
                let mut ys_sorted = ys.clone();
                xs_sorted.sort_unstable();
                ys_sorted.sort_unstable();
                xs_sorted == ys_sorted
                    && PageSnapshot {
                        outlinks: Vec::new(),
                        ..x.clone()
                    } == PageSnapshot {
                        outlinks: Vec::new(),
                        ..y.clone()
                    }
            })
        })
    }
}

impl CrawlSeries {
    /// Builds a series, checking every structural invariant.
    ///
    /// `page_urls` must be canonical and unique; `snapshots[c][p]` is page `p`
    /// at crawl `c` and its outlinks must be ids from `urls`.
    pub fn new(
        page_urls: Vec<String>,
        crawl_times: Vec<DateTime<Utc>>,
        snapshots: Vec<Vec<PageSnapshot>>,
        mut urls: UrlTable,
        digest_algorithm: impl Into<String>,
    ) -> Result<Self> {
        let n = crawl_times.len();
        if n < 2 {
            return Err(Error::invalid(format!("a crawl series needs at least 2 crawls, got {n}")));
        }
        if crawl_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("crawl times must be strictly increasing"));
        }
        if page_urls.is_empty() {
            return Err(Error::EmptySeries);
        }
        if snapshots.len() != n || snapshots.iter().any(|s| s.len() != page_urls.len()) {
            return Err(Error::invalid("snapshot grid does not match crawls x pages"));
        }
        let mut page_links = Vec::with_capacity(page_urls.len());
        let mut link_pages = HashMap::with_capacity(page_urls.len());
        for (p, u) in page_urls.iter().enumerate() {
            let id = urls.intern_canonical(u)?;
            if link_pages.insert(id, p).is_some() {
                return Err(Error::invalid(format!("duplicate page URL {u}")));
            }
            page_links.push(id);
        }
        for (c, crawl) in snapshots.iter().enumerate() {
            for (p, snap) in crawl.iter().enumerate() {
                snap.validate().map_err(|e| {
                    Error::invalid(format!("page {} at crawl {c}: {e}", page_urls[p]))
                })?;
                if snap.outlinks.iter().any(|l| l.0 as usize >= urls.len()) {
                    return Err(Error::invalid("outlink id outside URL table"));
                }
            }
        }
        let pages = page_urls
            .into_iter()
            .enumerate()
            .map(|(id, url)| PageId { id, url })
            .collect();
        Ok(Self {
            pages,
            crawl_times,
            snapshots,
            urls,
            page_links,
            link_pages,
            digest_algorithm: digest_algorithm.into(),
        })
    }

    pub fn pages(&self) -> &[PageId] {
        &self.pages
    }

    pub fn n_pages(&self) -> usize {
        self.pages.len()
    }

    pub fn n_crawls(&self) -> usize {
        self.crawl_times.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.crawl_times.len() - 1
    }

    pub fn crawl_times(&self) -> &[DateTime<Utc>] {
        &self.crawl_times
    }

    pub fn snapshot(&self, crawl: usize, page: usize) -> &PageSnapshot {
        &self.snapshots[crawl][page]
    }

    pub fn crawl(&self, crawl: usize) -> &[PageSnapshot] {
        &self.snapshots[crawl]
    }

    pub(crate) fn crawl_mut(&mut self, crawl: usize) -> &mut [PageSnapshot] {
        &mut self.snapshots[crawl]
    }

    pub fn urls(&self) -> &UrlTable {
        &self.urls
    }

    pub fn digest_algorithm(&self) -> &str {
        &self.digest_algorithm
    }

    /// Page index of an in-series URL.
    pub fn page_of_link(&self, link: LinkId) -> Option<usize> {
        self.link_pages.get(&link).copied()
    }

    pub fn page_link(&self, page: usize) -> LinkId {
        self.page_links[page]
    }

    /// Scope of `link` when it appears on `page`.
    pub fn scope_of(&self, page: usize, link: LinkId) -> LinkScope {
        if self.urls.origin(self.page_links[page]) == self.urls.origin(link) {
            LinkScope::Internal
        } else {
            LinkScope::External
        }
    }

    /// Outlink counts of `page` at `crawl`, indexed by [`LinkScope::index`].
    pub fn outlink_counts(&self, crawl: usize, page: usize) -> [u32; 2] {
        let mut counts = [0u32; 2];
        for &l in &self.snapshots[crawl][page].outlinks {
            counts[self.scope_of(page, l).index()] += 1;
        }
        counts
    }

    /// New outlink ids of `page` in `interval`, as `(internal, external)`.
    pub fn new_outlink_ids(&self, page: usize, interval: usize) -> (Vec<LinkId>, Vec<LinkId>) {
        let prev = &self.snapshots[interval][page].outlinks;
        let curr = &self.snapshots[interval + 1][page].outlinks;
        let mut internal = Vec::new();
        let mut external = Vec::new();
        let mut j = 0;
        for &l in curr {
            while j < prev.len() && prev[j] < l {
                j += 1;
            }
            if j < prev.len() && prev[j] == l {
                continue;
            }
            match self.scope_of(page, l) {
                LinkScope::Internal => internal.push(l),
                LinkScope::External => external.push(l),
            }
        }
        (internal, external)
    }

    /// Per-page, per-interval new-outlink counts and per-crawl outlink counts.
    pub fn link_history(&self) -> LinkHistory {
        let n_pages = self.n_pages();
        let n_int = self.n_intervals();
        let n_crawls = self.n_crawls();
        let mut new_counts = vec![[0u32; 2]; n_pages * n_int];
        let mut outlink_counts = vec![[0u32; 2]; n_pages * n_crawls];
        for p in 0..n_pages {
            for c in 0..n_crawls {
                outlink_counts[p * n_crawls + c] = self.outlink_counts(c, p);
            }
            for i in 0..n_int {
                let (a, b) = self.new_outlink_ids(p, i);
                new_counts[p * n_int + i] = [a.len() as u32, b.len() as u32];
            }
        }
        LinkHistory {
            n_pages,
            n_intervals: n_int,
            new_counts,
            outlink_counts,
        }
    }

    /// Content-change flags of `page` for every interval.
    pub fn content_changes(&self, page: usize) -> Result<Vec<bool>> {
        (0..self.n_intervals())
            .map(|i| {
                content_changed(
                    &self.snapshots[i][page].content_digest,
                    &self.snapshots[i + 1][page].content_digest,
                )
            })
            .collect()
    }

    /// Outlink URLs of a snapshot as strings.
    pub fn outlink_urls(&self, crawl: usize, page: usize) -> BTreeSet<String> {
        self.snapshots[crawl][page]
            .outlinks
            .iter()
            .map(|&l| self.urls.url(l).to_string())
            .collect()
    }

    /// True when every snapshot carries a semantic vector.
    pub fn has_semantic_vectors(&self) -> bool {
        self.snapshots
            .iter()
            .all(|c| c.iter().all(|s| s.semantic_vector.is_some()))
    }
}

/// Derived link statistics of a series, computed once and shared.
#[derive(Debug, Clone)]
pub struct LinkHistory {
    n_pages: usize,
    n_intervals: usize,
    new_counts: Vec<[u32; 2]>,
    outlink_counts: Vec<[u32; 2]>,
}

impl LinkHistory {
    pub fn n_pages(&self) -> usize {
        self.n_pages
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn new_count(&self, page: usize, interval: usize, scope: LinkScope) -> u32 {
        self.new_counts[page * self.n_intervals + interval][scope.index()]
    }

    pub fn outlink_count(&self, page: usize, crawl: usize, scope: LinkScope) -> u32 {
        self.outlink_counts[page * (self.n_intervals + 1) + crawl][scope.index()]
    }
}

/// Convenience constructor for small hand-built series (fixtures, tests,
/// bindings). Every snapshot starts as a 100-byte page with no outlinks,
/// digest `[0]`, quality 0.5 and no semantic vector; crawls are a week apart.
#[derive(Debug, Clone)]
pub struct SeriesBuilder {
    pages: Vec<String>,
    start: DateTime<Utc>,
    grid: Vec<Vec<(Vec<String>, PageSnapshot)>>,
}

impl SeriesBuilder {
    pub fn new<S: AsRef<str>>(page_urls: &[S], n_crawls: usize) -> Result<Self> {
        let pages = page_urls
            .iter()
            .map(|u| canonical_url(u.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let start = DateTime::parse_from_rfc3339("2021-03-01T00:00:00Z")
            .expect("constant timestamp")
            .with_timezone(&Utc);
        let grid = (0..n_crawls)
            .map(|c| {
                let t = start + chrono::Duration::weeks(c as i64);
                (0..pages.len())
                    .map(|_| {
                        (
                            Vec::new(),
                            PageSnapshot {
                                fetch_time: t,
                                outlinks: Vec::new(),
                                inlinks: None,
                                content_digest: vec![0],
                                content_size: 100,
                                text_size: 50,
                                text_quality: 0.5,
                                semantic_vector: None,
                                pagerank: None,
                                trustrank: None,
                            },
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(Self { pages, start, grid })
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start
    }

    /// Replaces the outlinks of `page` at `crawl`.
    pub fn links<S: AsRef<str>>(mut self, crawl: usize, page: usize, links: &[S]) -> Self {
        self.grid[crawl][page].0 = links.iter().map(|l| l.as_ref().to_string()).collect();
        self
    }

    /// Sets the same outlinks at every crawl from `from` on.
    pub fn links_from<S: AsRef<str>>(mut self, from: usize, page: usize, links: &[S]) -> Self {
        for c in from..self.grid.len() {
            self = self.links(c, page, links);
        }
        self
    }

    /// Arbitrary edit of the non-link fields of one snapshot.
    pub fn with(mut self, crawl: usize, page: usize, f: impl FnOnce(&mut PageSnapshot)) -> Self {
        f(&mut self.grid[crawl][page].1);
        self
    }

    /// Builds without graph metrics.
    pub fn build_raw(self) -> Result<CrawlSeries> {
        let mut urls = UrlTable::new();
        for p in &self.pages {
            urls.intern_canonical(p)?;
        }
        let times = self.grid.iter().map(|c| c.first().map_or(self.start, |s| s.1.fetch_time)).collect();
        let mut snapshots = Vec::with_capacity(self.grid.len());
        for crawl in self.grid {
            let mut row = Vec::with_capacity(crawl.len());
            for (links, mut snap) in crawl {
                let mut ids = links.iter().map(|l| urls.intern(l)).collect::<Result<Vec<_>>>()?;
                ids.sort_unstable();
                ids.dedup();
                snap.outlinks = ids;
                row.push(snap);
            }
            snapshots.push(row);
        }
        CrawlSeries::new(self.pages, times, snapshots, urls, "sha256")
    }

    /// Builds and fills inlink counts, PageRank and TrustRank from the graph.
    pub fn build(self) -> Result<CrawlSeries> {
        let mut s = self.build_raw()?;
        crate::ingest::fill_graph_metrics(&mut s, None, &crate::graph::RankParams::default())?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn classify_gender_nrw_examples() {
        let src = "https://www.gender-nrw.de/haeusliche-gewalt/";
        assert_eq!(
            classify_link(src, "https://www.gender-nrw.de/contact/").unwrap(),
            LinkScope::Internal
        );
        assert_eq!(
            classify_link(src, "https://www.mkffi.nrw/").unwrap(),
            LinkScope::External
        );
        assert_eq!(
            classify_link(src, "http://gender-nrw.de/newsletter").unwrap(),
            LinkScope::External
        );
        assert_eq!(
            classify_link("https://a.com/x", "https://a.com/x").unwrap(),
            LinkScope::Internal
        );
    }

    #[test]
    fn scheme_mismatch_alone_is_external() {
        assert_eq!(
            classify_link("https://a.com/", "http://a.com/").unwrap(),
            LinkScope::External
        );
        assert_eq!(
            classify_link("https://A.com/", "https://a.COM/b").unwrap(),
            LinkScope::Internal
        );
        // subdomains are different hosts
        assert_eq!(
            classify_link("https://www.a.com/", "https://a.com/").unwrap(),
            LinkScope::External
        );
    }

    #[test]
    fn malformed_url_names_offender() {
        let err = classify_link("https://a.com/", "not a url").unwrap_err();
        assert!(err.to_string().contains("not a url"), "{err}");
        assert!(classify_link("mailto:x@y.z", "https://a.com").is_err());
    }

    #[test]
    fn depths() {
        let d = url_depths("domain.com/en/news/article123456/").unwrap();
        assert_eq!(d.path_depth, 3);
        assert_eq!(url_depths("sub.domain.com").unwrap().domain_depth, 3);
        let d = url_depths("domain.com/").unwrap();
        assert_eq!((d.path_depth, d.domain_depth), (0, 2));
        let d = url_depths("https://x.y.example.org/a//b?q=1").unwrap();
        assert_eq!((d.path_depth, d.domain_depth), (2, 4));
    }

    #[test]
    fn canonicalization() {
        assert_eq!(canonical_url("https://A.com/x/#frag").unwrap(), "https://a.com/x");
        assert_eq!(canonical_url("https://a.com/").unwrap(), "https://a.com");
        assert_eq!(canonical_url("https://a.com").unwrap(), "https://a.com");
        assert_eq!(canonical_url("https://a.com/x/?q=1").unwrap(), "https://a.com/x?q=1");
        assert_eq!(canonical_url("http://a.com:8080/x").unwrap(), "http://a.com:8080/x");
    }

    #[test]
    fn new_outlinks_set_difference() {
        let src = "https://s.com/";
        let a = "https://s.com/a";
        let b = "https://s.com/b";
        let c = "https://s.com/c";
        let n = new_outlinks(&set(&[a, b]), &set(&[b, c]), src).unwrap();
        assert_eq!(n.internal, set(&[c]));
        assert!(n.external.is_empty());

        let same = new_outlinks(&set(&[a, b]), &set(&[a, b]), src).unwrap();
        assert_eq!(same, NewOutlinks::default());

        let n = new_outlinks(&set(&[]), &set(&[a, "https://other.org/x"]), src).unwrap();
        assert_eq!((n.count(LinkScope::Internal), n.count(LinkScope::External)), (1, 1));
    }

    #[test]
    fn trailing_slash_and_fragment_are_not_new() {
        let src = "https://s.com/";
        let n = new_outlinks(
            &set(&["https://s.com/a/"]),
            &set(&["https://s.com/a#top", "https://s.com/a?x=1"]),
            src,
        )
        .unwrap();
        assert_eq!(n.internal, set(&["https://s.com/a?x=1"]));
    }

    #[test]
    fn digest_changes() {
        assert!(!content_changed(b"d", b"d").unwrap());
        assert!(content_changed(b"d", b"e").unwrap());
        assert!(matches!(content_changed(b"", b"e"), Err(Error::MissingData(_))));

        // 10 digests with changes at 4 adjacent pairs
        let digests: Vec<&[u8]> = vec![
            b"a", b"a", b"b", b"b", b"b", b"c", b"c", b"d", b"d", b"e",
        ];
        let flags: Vec<bool> = digests
            .windows(2)
            .map(|w| content_changed(w[0], w[1]).unwrap())
            .collect();
        assert_eq!(flags.len(), 9);
        assert_eq!(flags.iter().filter(|&&f| f).count(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn url_strategy() -> impl Strategy<Value = String> {
            (prop::sample::select(vec!["https", "http"]), 0u8..3, 0u16..20)
                .prop_map(|(s, h, p)| format!("{s}://h{h}.com/p{p}"))
        }

        proptest! {
            #[test]
            fn new_outlinks_identity(
                prev in prop::collection::btree_set(url_strategy(), 0..15),
                curr in prop::collection::btree_set(url_strategy(), 0..15),
            ) {
                let n = new_outlinks(&prev, &curr, "https://h0.com/").unwrap();
                let new: BTreeSet<String> = n.internal.union(&n.external).cloned().collect();
                prop_assert!(new.is_disjoint(&prev));
                let kept: BTreeSet<String> = curr.intersection(&prev).cloned().collect();
                let all: BTreeSet<String> = new.union(&kept).cloned().collect();
                prop_assert_eq!(all, curr.clone());
                let unchanged = new_outlinks(&curr, &curr, "https://h0.com/").unwrap();
                prop_assert_eq!(unchanged.count(LinkScope::Internal), 0);
                prop_assert_eq!(unchanged.count(LinkScope::External), 0);
            }
        }
    }
}
