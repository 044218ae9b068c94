//! Loading, validating and aligning per-crawl snapshot files.
//!
//! The canonical format is one JSON object per line, one file per crawl
//! (`crawl_01.jsonl`, `crawl_02.jsonl`, ...). Optional fields are omitted when
//! absent. Only pages that are present and valid in every crawl are kept.

pub mod text;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, RankParams};
use crate::snapshot::{canonical_url, CrawlSeries, InlinkCounts, PageSnapshot, UrlTable};

pub use text::{embed_corpus, fallback_text_quality, normalize_semantic, tokenize};

/// Name of the optional sidecar carrying series-level metadata.
pub const SERIES_META_FILE: &str = "series.json";
const DEFAULT_DIGEST: &str = "sha256";

/// One line of the canonical snapshot format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub url: String,
    pub fetch_time: DateTime<Utc>,
    #[serde(default)]
    pub out_links: Vec<String>,
    pub content_digest: String,
    pub content_size: u64,
    pub text_size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pagerank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trustrank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inlinks_int: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inlinks_ext: Option<u32>,
    /// Raw page text; only read, used to fill a missing vector or quality.
    #[serde(default, skip_serializing)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotFile {
    pub path: PathBuf,
    /// 1-based position of the crawl in the series.
    pub crawl_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SeriesMeta {
    digest_algorithm: String,
    n_crawls: usize,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Pages missing a semantic vector in any crawl are discarded as incomplete.
    pub require_semantic: bool,
    /// Embed pages that carry `text` but no vector (per crawl corpus).
    pub embed_missing: bool,
    pub embed_seed: u64,
    pub rank_params: RankParams,
}


#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStats {
    pub path: String,
    pub crawl_index: usize,
    pub records: usize,
    pub malformed_lines: usize,
}

/// Bookkeeping of an ingestion run. Page counts are per unique URL and satisfy
/// `kept + discarded_incomplete + discarded_invalid == read`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub pages_read: usize,
    pub pages_kept: usize,
    pub pages_discarded_incomplete: usize,
    pub pages_discarded_invalid: usize,
    pub outlinks_dropped: usize,
    pub recomputed_graph_metrics: bool,
    pub tld_histogram: BTreeMap<String, usize>,
    pub files: Vec<FileStats>,
}

impl IngestReport {
    pub fn is_consistent(&self) -> bool {
        self.pages_kept + self.pages_discarded_incomplete + self.pages_discarded_invalid
            == self.pages_read
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("pages read:                 {}\n", self.pages_read));
        s.push_str(&format!("pages kept:                 {}\n", self.pages_kept));
        s.push_str(&format!("discarded (incomplete):     {}\n", self.pages_discarded_incomplete));
        s.push_str(&format!("discarded (invalid):        {}\n", self.pages_discarded_invalid));
        s.push_str(&format!("unparsable outlinks dropped: {}\n", self.outlinks_dropped));
        s.push_str(&format!("graph metrics recomputed:   {}\n", self.recomputed_graph_metrics));
        for f in &self.files {
            s.push_str(&format!(
                "crawl {:>2}: {} records, {} malformed lines ({})\n",
                f.crawl_index, f.records, f.malformed_lines, f.path
            ));
        }
        let mut tlds: Vec<(&String, &usize)> = self.tld_histogram.iter().collect();
        tlds.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        s.push_str("top TLDs:\n");
        for (tld, n) in tlds.into_iter().take(20) {
            s.push_str(&format!("  .{tld:<12} {n}\n"));
        }
        s
    }
}

/// Lower median of a set of timestamps.
pub fn median_time(times: &[DateTime<Utc>]) -> Option<DateTime<Utc>> {
    let mut t = times.to_vec();
    t.sort_unstable();
    t.get((t.len().max(1) - 1) / 2).copied()
}

/// `crawl_*.jsonl` files of a directory in name order, numbered from 1.
pub fn discover_snapshot_files(dir: &Path) -> Result<Vec<SnapshotFile>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("crawl_") && n.ends_with(".jsonl"))
        })
        .collect();
    names.sort();
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, path)| SnapshotFile {
            path,
            crawl_index: i + 1,
        })
        .collect())
}

struct Parsed {
    key: String,
    fetch_time: DateTime<Utc>,
    outlinks: Vec<String>,
    dropped: usize,
    digest: Vec<u8>,
    content_size: u64,
    text_size: u64,
    text_quality: Option<f64>,
    vector: Option<Vec<f64>>,
    text: Option<String>,
    pagerank: Option<f64>,
    trustrank: Option<f64>,
    inlinks: Option<InlinkCounts>,
}

enum Slot {
    Missing,
    Invalid,
    Valid(Box<Parsed>),
}

fn parse_record(rec: SnapshotRecord) -> std::result::Result<Parsed, (String, String)> {
    let key = canonical_url(&rec.url).map_err(|e| (rec.url.clone(), e.to_string()))?;
    let bad = |msg: String| (key.clone(), msg);
    let digest = hex::decode(&rec.content_digest).map_err(|e| bad(format!("digest: {e}")))?;
    if digest.is_empty() {
        return Err(bad("empty content digest".into()));
    }
    if rec.content_size < 1 {
        return Err(bad("empty page (content_size 0)".into()));
    }
    if let Some(q) = rec.text_quality {
        if !(0.0..=1.0).contains(&q) {
            return Err(bad(format!("text_quality {q} outside [0, 1]")));
        }
    }
    for s in [rec.pagerank, rec.trustrank].into_iter().flatten() {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(bad(format!("negative or non-finite graph score {s}")));
        }
    }
    let vector = match rec.semantic_vector {
        Some(v) => match normalize_semantic(&v) {
            Ok(u) => Some(u),
            Err(Error::DegenerateVector) => None,
            Err(e) => return Err(bad(e.to_string())),
        },
        None => None,
    };
    let mut outlinks = Vec::with_capacity(rec.out_links.len());
    let mut dropped = 0;
    for l in &rec.out_links {
        match canonical_url(l) {
            Ok(c) => outlinks.push(c),
            Err(_) => dropped += 1,
        }
    }
    let inlinks = match (rec.inlinks_int, rec.inlinks_ext) {
        (Some(internal), Some(external)) => Some(InlinkCounts { internal, external }),
        _ => None,
    };
    Ok(Parsed {
        key,
        fetch_time: rec.fetch_time,
        outlinks,
        dropped,
        digest,
        content_size: rec.content_size,
        text_size: rec.text_size,
        text_quality: rec.text_quality,
        vector,
        text: rec.text,
        pagerank: rec.pagerank,
        trustrank: rec.trustrank,
        inlinks,
    })
}

type FileParse = (Vec<std::result::Result<Parsed, (String, String)>>, FileStats);

fn parse_file(file: &SnapshotFile) -> Result<FileParse> {
    let f = File::open(&file.path).map_err(|e| Error::io(&file.path, e))?;
    let mut out = Vec::new();
    let mut stats = FileStats {
        path: file.path.display().to_string(),
        crawl_index: file.crawl_index,
        records: 0,
        malformed_lines: 0,
    };
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(&file.path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        stats.records += 1;
        match serde_json::from_str::<SnapshotRecord>(&line) {
            Ok(rec) => out.push(parse_record(rec)),
            Err(e) => {
                // A line that is not a record at all; recover the URL if we can.
                stats.malformed_lines += 1;
                let url = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("url").and_then(|u| u.as_str()).map(str::to_string));
                if let Some(u) = url {
                    let key = canonical_url(&u).unwrap_or(u);
                    out.push(Err((key, e.to_string())));
                }
            }
        }
    }
    Ok((out, stats))
}

fn fill_from_text(slots: &mut BTreeMap<String, Vec<Slot>>, n: usize, opts: &IngestOptions) -> Result<()> {
    for c in 0..n {
        let mut keys = Vec::new();
        let mut docs = Vec::new();
        for (k, s) in slots.iter() {
            if let Slot::Valid(p) = &s[c] {
                if let Some(t) = &p.text {
                    keys.push(k.clone());
                    docs.push(tokenize(t));
                }
            }
        }
        if docs.is_empty() {
            continue;
        }
        let vectors = if opts.embed_missing {
            Some(embed_corpus(&docs, crate::snapshot::SEMANTIC_DIM, opts.embed_seed)?)
        } else {
            None
        };
        for (i, k) in keys.iter().enumerate() {
            if let Some(Slot::Valid(p)) = slots.get_mut(k).map(|s| &mut s[c]) {
                if p.text_quality.is_none() {
                    p.text_quality = Some(fallback_text_quality(&docs[i]));
                }
                if p.vector.is_none() {
                    if let Some(v) = &vectors {
                        p.vector = v[i].clone();
                    }
                }
            }
        }
    }
    Ok(())
}

/// Loads and aligns snapshot files into a series.
///
/// Pages absent from a crawl, or lacking a required field there, are
/// discarded as incomplete; pages with an invalid record anywhere are
/// discarded as invalid. Crawl times are the lower medians of each file's
/// fetch times. Missing inlink counts and graph scores are recomputed.
pub fn load_crawl_series(
    files: &[SnapshotFile],
    opts: &IngestOptions,
) -> Result<(CrawlSeries, IngestReport)> {
    let n = files.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 crawl files, got {n}")));
    }
    let mut order: Vec<&SnapshotFile> = files.iter().collect();
    order.sort_by_key(|f| f.crawl_index);
    if order.iter().enumerate().any(|(i, f)| f.crawl_index != i + 1) {
        return Err(Error::invalid("crawl indices must be contiguous from 1"));
    }
    let parsed: Vec<FileParse> = order
        .par_iter()
        .map(|f| parse_file(f))
        .collect::<Result<_>>()?;

    let mut slots: BTreeMap<String, Vec<Slot>> = BTreeMap::new();
    let mut times: Vec<Vec<DateTime<Utc>>> = vec![Vec::new(); n];
    let mut file_stats = Vec::with_capacity(n);
    let mut dropped = 0;
    for (c, (records, stats)) in parsed.into_iter().enumerate() {
        file_stats.push(stats);
        for r in records {
            let (key, slot) = match r {
                Ok(p) => {
                    times[c].push(p.fetch_time);
                    dropped += p.dropped;
                    (p.key.clone(), Slot::Valid(Box::new(p)))
                }
                Err((key, reason)) => {
                    log::debug!("invalid record for {key} in crawl {}: {reason}", c + 1);
                    (key, Slot::Invalid)
                }
            };
            let entry = slots
                .entry(key)
                .or_insert_with(|| (0..n).map(|_| Slot::Missing).collect());
            entry[c] = match entry[c] {
                Slot::Missing => slot,
                // duplicate records for one URL in one crawl
                _ => Slot::Invalid,
            };
        }
    }
    if opts.embed_missing || slots.values().flatten().any(|s| matches!(s, Slot::Valid(p) if p.text_quality.is_none())) {
        fill_from_text(&mut slots, n, opts)?;
    }

    let mut report = IngestReport {
        pages_read: slots.len(),
        pages_kept: 0,
        pages_discarded_incomplete: 0,
        pages_discarded_invalid: 0,
        outlinks_dropped: dropped,
        recomputed_graph_metrics: false,
        tld_histogram: BTreeMap::new(),
        files: file_stats,
    };
    let mut kept: Vec<(String, Vec<Parsed>)> = Vec::new();
    let mut dim: Option<usize> = None;
    for (key, page_slots) in slots {
        if page_slots.iter().any(|s| matches!(s, Slot::Invalid)) {
            report.pages_discarded_invalid += 1;
            continue;
        }
        let complete = page_slots.iter().all(|s| match s {
            Slot::Valid(p) => {
                p.text_quality.is_some() && (!opts.require_semantic || p.vector.is_some())
            }
            _ => false,
        });
        if !complete {
            report.pages_discarded_incomplete += 1;
            continue;
        }
        let recs: Vec<Parsed> = page_slots
            .into_iter()
            .map(|s| match s {
                Slot::Valid(p) => *p,
                _ => unreachable!(),
            })
            .collect();
        let dims_ok = recs.iter().filter_map(|p| p.vector.as_ref()).all(|v| {
            let d = *dim.get_or_insert(v.len());
            d == v.len()
        });
        if !dims_ok {
            report.pages_discarded_invalid += 1;
            continue;
        }
        kept.push((key, recs));
    }
    if kept.is_empty() {
        return Err(Error::EmptySeries);
    }
    report.pages_kept = kept.len();

    let crawl_times: Vec<DateTime<Utc>> = times
        .iter()
        .map(|t| median_time(t).ok_or(Error::EmptySeries))
        .collect::<Result<_>>()?;

    let mut urls = UrlTable::new();
    let page_urls: Vec<String> = kept.iter().map(|(k, _)| k.clone()).collect();
    for u in &page_urls {
        urls.intern_canonical(u)?;
        let tld = u
            .split("://")
            .nth(1)
            .and_then(|rest| rest.split(['/', '?', ':']).next())
            .and_then(|host| host.rsplit('.').next())
            .unwrap_or("")
            .to_string();
        *report.tld_histogram.entry(tld).or_insert(0) += 1;
    }
    let mut grid: Vec<Vec<PageSnapshot>> = (0..n).map(|_| Vec::with_capacity(kept.len())).collect();
    for (_, recs) in kept {
        for (c, p) in recs.into_iter().enumerate() {
            let mut outlinks = p
                .outlinks
                .iter()
                .map(|u| urls.intern_canonical(u))
                .collect::<Result<Vec<_>>>()?;
            outlinks.sort_unstable();
            outlinks.dedup();
            grid[c].push(PageSnapshot {
                fetch_time: p.fetch_time,
                outlinks,
                inlinks: p.inlinks,
                content_digest: p.digest,
                content_size: p.content_size,
                text_size: p.text_size,
                text_quality: p.text_quality.unwrap_or_default(),
                semantic_vector: p.vector.map(Arc::from),
                pagerank: p.pagerank,
                trustrank: p.trustrank,
            });
        }
    }
    let digest_algorithm = files
        .first()
        .and_then(|f| f.path.parent())
        .and_then(|d| fs::read_to_string(d.join(SERIES_META_FILE)).ok())
        .and_then(|s| serde_json::from_str::<SeriesMeta>(&s).ok())
        .map(|m| m.digest_algorithm)
        .unwrap_or_else(|| DEFAULT_DIGEST.to_string());
    let mut series = CrawlSeries::new(page_urls, crawl_times, grid, urls, digest_algorithm)?;
    report.recomputed_graph_metrics = fill_graph_metrics(&mut series, None, &opts.rank_params)?;
    Ok((series, report))
}

/// Loads every `crawl_*.jsonl` file of a directory.
pub fn load_series_dir(dir: &Path, opts: &IngestOptions) -> Result<(CrawlSeries, IngestReport)> {
    let files = discover_snapshot_files(dir)?;
    load_crawl_series(&files, opts)
}

/// Fills absent inlink counts, PageRank and TrustRank per crawl from the
/// in-series graph. With no `trusted` set, the top 1% of pages by internal
/// inlinks are trusted. Returns whether anything was recomputed.
pub fn fill_graph_metrics(
    series: &mut CrawlSeries,
    trusted: Option<&[usize]>,
    params: &RankParams,
) -> Result<bool> {
    let mut any = false;
    for c in 0..series.n_crawls() {
        let crawl = series.crawl(c);
        let need_inl = crawl.iter().any(|s| s.inlinks.is_none());
        let need_pr = crawl.iter().any(|s| s.pagerank.is_none());
        let need_tr = crawl.iter().any(|s| s.trustrank.is_none());
        if !(need_inl || need_pr || need_tr) {
            continue;
        }
        any = true;
        let g = graph::build_graph(series, c);
        let inl = graph::inlink_counts(&g);
        let pr = if need_pr { Some(graph::pagerank(&g, params)?) } else { None };
        let tr = if need_tr {
            let fallback;
            let t = match trusted {
                Some(t) => t,
                None => {
                    fallback = graph::default_trusted_set(&inl);
                    &fallback
                }
            };
            Some(graph::trustrank(&g, t, params)?)
        } else {
            None
        };
        for (p, snap) in series.crawl_mut(c).iter_mut().enumerate() {
            snap.inlinks.get_or_insert(inl[p]);
            if let Some(pr) = &pr {
                snap.pagerank.get_or_insert(pr.scores[p]);
            }
            if let Some(tr) = &tr {
                snap.trustrank.get_or_insert(tr.scores[p]);
            }
        }
    }
    Ok(any)
}

/// Canonical records of one crawl, in page order, outlinks sorted.
pub fn series_records(series: &CrawlSeries, crawl: usize) -> Vec<SnapshotRecord> {
    series
        .crawl(crawl)
        .iter()
        .enumerate()
        .map(|(p, s)| {
            let mut out_links: Vec<String> = s
                .outlinks
                .iter()
                .map(|&l| series.urls().url(l).to_string())
                .collect();
            out_links.sort_unstable();
            SnapshotRecord {
                url: series.pages()[p].url.clone(),
                fetch_time: s.fetch_time,
                out_links,
                content_digest: hex::encode(&s.content_digest),
                content_size: s.content_size,
                text_size: s.text_size,
                text_quality: Some(s.text_quality),
                semantic_vector: s.semantic_vector.as_ref().map(|v| v.to_vec()),
                pagerank: s.pagerank,
                trustrank: s.trustrank,
                inlinks_int: s.inlinks.map(|i| i.internal),
                inlinks_ext: s.inlinks.map(|i| i.external),
                text: None,
            }
        })
        .collect()
}

/// Writes a series as `crawl_NN.jsonl` files plus the metadata sidecar.
pub fn write_crawl_series(series: &CrawlSeries, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = series.n_crawls().to_string().len().max(2);
    let mut paths = Vec::with_capacity(series.n_crawls());
    for c in 0..series.n_crawls() {
        let path = dir.join(format!("crawl_{:0width$}.jsonl", c + 1));
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        for rec in series_records(series, c) {
            let line = serde_json::to_string(&rec).map_err(|e| Error::parse("record", e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    let meta = SeriesMeta {
        digest_algorithm: series.digest_algorithm().to_string(),
        n_crawls: series.n_crawls(),
    };
    let meta_path = dir.join(SERIES_META_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap() + "\n")
        .map_err(|e| Error::io(&meta_path, e))?;
    Ok(paths)
}
