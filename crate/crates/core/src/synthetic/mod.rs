//! Synthetic evolving web: crawl series whose link-creation rates, topics
//! and content drift are known exactly.
//!
//! Pages live on sites of `pages_per_site` pages; every site leans towards
//! one topic. Per interval a page gains `Poisson(lambda)` new outlinks of
//! each scope, loses a small random share of its old ones, and changes its
//! content with a fixed probability that is independent of its links.

mod calibration;

use std::io::{BufRead, Write};

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::RankParams;
use crate::ingest::fill_graph_metrics;
use crate::seed::{derive_seed, rng};
use crate::snapshot::{CrawlSeries, LinkId, LinkScope, PageSnapshot, UrlTable};

pub use calibration::{calibration_report, group_of, CalibrationReport, IntervalMoments, ScopeCalibration, GROUP_LABELS};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.tsv";
const START: &str = "2021-03-01T00:00:00Z";
const PICK_ATTEMPTS: usize = 8;

/// Distribution of a page's base rate of new outlinks per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateDistribution {
    Constant {
        rate: f64,
    },
    /// Zero with probability `zero_inflation`, else `exp(N(log_mean, log_sd))`.
    ZeroInflatedLogNormal {
        zero_inflation: f64,
        log_mean: f64,
        log_sd: f64,
    },
}

impl RateDistribution {
    /// Calibrated so that about 70% of pages gain no internal link in an
    /// interval while the mean stays near 3 with a spread five to seven
    /// times larger. Part of the zeros come from small nonzero rates.
    pub fn internal_default() -> Self {
        RateDistribution::ZeroInflatedLogNormal {
            zero_inflation: 0.55,
            log_mean: 0.4,
            log_sd: 1.8,
        }
    }

    pub fn external_default() -> Self {
        RateDistribution::ZeroInflatedLogNormal {
            zero_inflation: 0.92,
            log_mean: 0.9,
            log_sd: 1.2,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            RateDistribution::Constant { rate } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::invalid(format!("{name}: rate {rate} must be finite and >= 0")));
                }
            }
            RateDistribution::ZeroInflatedLogNormal {
                zero_inflation,
                log_mean,
                log_sd,
            } => {
                if !(0.0..=1.0).contains(&zero_inflation) {
                    return Err(Error::invalid(format!("{name}: zero_inflation {zero_inflation} outside [0, 1]")));
                }
                if !log_mean.is_finite() || !(log_sd >= 0.0 && log_sd.is_finite()) {
                    return Err(Error::invalid(format!("{name}: bad log-normal ({log_mean}, {log_sd})")));
                }
            }
        }
        Ok(())
    }
}

/// How a page's rate evolves over the intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Persistence {
    Fixed,
    /// Two-state Markov regime: the rate is `base * active_factor` while
    /// active and `base * quiet_factor` while quiet.
    Bursty {
        stay_active: f64,
        stay_quiet: f64,
        active_factor: f64,
        quiet_factor: f64,
    },
}

impl Persistence {
    pub fn bursty() -> Self {
        Persistence::Bursty {
            stay_active: 0.7,
            stay_quiet: 0.85,
            active_factor: 3.0,
            quiet_factor: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Persistence::Bursty {
            stay_active,
            stay_quiet,
            active_factor,
            quiet_factor,
        } = *self
        {
            if !(0.0..=1.0).contains(&stay_active) || !(0.0..=1.0).contains(&stay_quiet) {
                return Err(Error::invalid("regime stay probabilities must lie in [0, 1]"));
            }
            if !(active_factor >= 0.0 && quiet_factor >= 0.0) {
                return Err(Error::invalid("regime factors must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Topic-level rate structure: every topic draws a log-rate shift carrying
/// `variance_share` of the log-normal variance (the page-level spread keeps
/// the rest, so the marginal spread is unchanged) and its own zero-inflation
/// probability from a Beta with the configured mean and the given
/// concentration. Small concentrations push topics towards all-silent or
/// all-active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicCoupling {
    pub variance_share: f64,
    pub concentration: f64,
}

impl Default for TopicCoupling {
    fn default() -> Self {
        Self {
            variance_share: 0.9,
            concentration: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_pages: usize,
    pub n_crawls: usize,
    pub n_topics: usize,
    pub semantic_dim: usize,
    /// Per-coordinate noise added to the topic centroid.
    pub semantic_noise: f64,
    /// Unit-norm centroids; drawn from the seed when absent.
    pub centroids: Option<Vec<Vec<f64>>>,
    pub pages_per_site: usize,
    /// Share of a site's pages that carry the site's topic.
    pub site_topic_share: f64,
    pub rates_int: RateDistribution,
    pub rates_ext: RateDistribution,
    pub persistence: Persistence,
    pub coupling: Option<TopicCoupling>,
    /// Share of new links that point at pages of the series.
    pub in_series_share: f64,
    /// Probability that an in-series internal target shares the topic.
    pub same_topic_preference: f64,
    /// Mean number of internal / external outlinks at the first crawl.
    pub initial_int: f64,
    pub initial_ext: f64,
    /// Probability that an existing outlink disappears in an interval.
    pub churn: f64,
    pub content_change_prob: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_pages: 2000,
            n_crawls: 10,
            n_topics: 10,
            semantic_dim: 32,
            semantic_noise: 0.15,
            centroids: None,
            pages_per_site: 50,
            site_topic_share: 0.8,
            rates_int: RateDistribution::internal_default(),
            rates_ext: RateDistribution::external_default(),
            persistence: Persistence::Fixed,
            coupling: None,
            in_series_share: 0.3,
            same_topic_preference: 0.8,
            initial_int: 8.0,
            initial_ext: 3.0,
            churn: 0.02,
            content_change_prob: 0.3,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pages == 0 {
            return Err(Error::invalid("n_pages must be positive"));
        }
        if self.n_crawls < 2 {
            return Err(Error::invalid(format!("n_crawls must be at least 2, got {}", self.n_crawls)));
        }
        if self.n_topics == 0 || self.semantic_dim == 0 || self.pages_per_site == 0 {
            return Err(Error::invalid("n_topics, semantic_dim and pages_per_site must be positive"));
        }
        for (name, p) in [
            ("site_topic_share", self.site_topic_share),
            ("in_series_share", self.in_series_share),
            ("same_topic_preference", self.same_topic_preference),
            ("churn", self.churn),
            ("content_change_prob", self.content_change_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} {p} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("semantic_noise", self.semantic_noise),
            ("initial_int", self.initial_int),
            ("initial_ext", self.initial_ext),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} {v} must be finite and >= 0")));
            }
        }
        self.rates_int.validate("rates_int")?;
        self.rates_ext.validate("rates_ext")?;
        self.persistence.validate()?;
        if let Some(c) = &self.coupling {
            if !((0.0..=1.0).contains(&c.variance_share) && c.concentration > 0.0) {
                return Err(Error::invalid("coupling needs variance_share in [0, 1] and concentration > 0"));
            }
        }
        if let Some(cs) = &self.centroids {
            if cs.len() != self.n_topics {
                return Err(Error::invalid(format!("{} centroids for {} topics", cs.len(), self.n_topics)));
            }
            for c in cs {
                let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                if c.len() != self.semantic_dim || (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("centroids must be unit vectors of semantic_dim entries"));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(format!("generator config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// The generating parameters behind a synthetic series.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub urls: Vec<String>,
    pub topic: Vec<usize>,
    /// Site home pages; these form the trusted set.
    pub seed_page: Vec<bool>,
    /// Base rates per page.
    pub lambda_int: Vec<f64>,
    pub lambda_ext: Vec<f64>,
    /// Effective rates `[interval][page]` under regime switching.
    pub interval_int: Option<Vec<Vec<f64>>>,
    pub interval_ext: Option<Vec<Vec<f64>>>,
}

impl GroundTruth {
    pub fn n_pages(&self) -> usize {
        self.urls.len()
    }

    pub fn rates(&self, scope: LinkScope) -> &[f64] {
        match scope {
            LinkScope::Internal => &self.lambda_int,
            LinkScope::External => &self.lambda_ext,
        }
    }

    /// Rate in force during `interval`.
    pub fn interval_rate(&self, scope: LinkScope, page: usize, interval: usize) -> f64 {
        let per = match scope {
            LinkScope::Internal => &self.interval_int,
            LinkScope::External => &self.interval_ext,
        };
        match per {
            Some(v) => v[interval][page],
            None => self.rates(scope)[page],
        }
    }

    pub fn trusted_pages(&self) -> Vec<usize> {
        (0..self.n_pages()).filter(|&p| self.seed_page[p]).collect()
    }

    /// Tab-separated sidecar: url, topic, seed flag, base rates, then the
    /// per-interval rates (`int@i`, `ext@i`) when regimes switch.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let n_int = self.interval_int.as_ref().map_or(0, Vec::len);
        let mut header = String::from("url\ttopic\tseed\tlambda_int\tlambda_ext");
        for i in 0..n_int {
            header.push_str(&format!("\tint@{i}"));
        }
        for i in 0..n_int {
            header.push_str(&format!("\text@{i}"));
        }
        let io = |e| Error::io("<ground truth>", e);
        writeln!(w, "{header}").map_err(io)?;
        for p in 0..self.n_pages() {
            let mut line = format!(
                "{}\t{}\t{}\t{}\t{}",
                self.urls[p],
                self.topic[p],
                u8::from(self.seed_page[p]),
                self.lambda_int[p],
                self.lambda_ext[p]
            );
            for per in [&self.interval_int, &self.interval_ext].into_iter().flatten() {
                for row in per {
                    line.push_str(&format!("\t{}", row[p]));
                }
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        Ok(())
    }

    /// Parses [`write_tsv`](Self::write_tsv) output, skipping leading `# ` lines.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().skip_while(|l| l.as_ref().is_ok_and(|l| l.starts_with("# ")));
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("ground truth", "empty file"))?
            .map_err(|e| Error::io("<ground truth>", e))?;
        let n_cols = header.split('\t').count();
        if n_cols < 5 || (n_cols - 5) % 2 != 0 {
            return Err(Error::parse("ground truth", format!("unexpected header `{header}`")));
        }
        let n_int = (n_cols - 5) / 2;
        let mut gt = GroundTruth {
            urls: Vec::new(),
            topic: Vec::new(),
            seed_page: Vec::new(),
            lambda_int: Vec::new(),
            lambda_ext: Vec::new(),
            interval_int: (n_int > 0).then(|| vec![Vec::new(); n_int]),
            interval_ext: (n_int > 0).then(|| vec![Vec::new(); n_int]),
        };
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<ground truth>", e))?;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != n_cols {
                return Err(Error::parse("ground truth", format!("line {}: {} fields", ln + 2, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse("ground truth", format!("line {}: {e}", ln + 2)));
            gt.urls.push(f[0].to_string());
            gt.topic.push(f[1].parse().map_err(|e| Error::parse("ground truth", format!("line {}: {e}", ln + 2)))?);
            gt.seed_page.push(f[2] == "1");
            gt.lambda_int.push(num(f[3])?);
            gt.lambda_ext.push(num(f[4])?);
            for i in 0..n_int {
                gt.interval_int.as_mut().expect("per-interval")[i].push(num(f[5 + i])?);
                gt.interval_ext.as_mut().expect("per-interval")[i].push(num(f[5 + n_int + i])?);
            }
        }
        Ok(gt)
    }
}

fn unit_gaussian(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(r)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn poisson(r: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).expect("positive rate").sample(r) as usize
    }
}

/// Per-topic parameters of one scope's rates.
struct TopicRates {
    zero: Vec<f64>,
    shift: Vec<f64>,
    page_sd: f64,
}

fn topic_rates(dist: &RateDistribution, coupling: Option<&TopicCoupling>, n_topics: usize, r: &mut ChaCha8Rng) -> TopicRates {
    let RateDistribution::ZeroInflatedLogNormal {
        zero_inflation: z,
        log_sd,
        ..
    } = *dist
    else {
        return TopicRates {
            zero: vec![0.0; n_topics],
            shift: vec![0.0; n_topics],
            page_sd: 0.0,
        };
    };
    match coupling {
        None => TopicRates {
            zero: vec![z; n_topics],
            shift: vec![0.0; n_topics],
            page_sd: log_sd,
        },
        Some(c) => {
            let tau = log_sd * c.variance_share.sqrt();
            let shift_dist = Normal::new(0.0, tau).expect("finite sd");
            let zero = (0..n_topics)
                .map(|_| {
                    if z > 0.0 && z < 1.0 {
                        Beta::new(z * c.concentration, (1.0 - z) * c.concentration)
                            .expect("positive shape")
                            .sample(r)
                    } else {
                        z
                    }
                })
                .collect();
            let shift = (0..n_topics).map(|_| shift_dist.sample(r)).collect();
            TopicRates {
                zero,
                shift,
                page_sd: log_sd * (1.0 - c.variance_share).sqrt(),
            }
        }
    }
}

fn draw_rate(dist: &RateDistribution, tr: &TopicRates, topic: usize, r: &mut ChaCha8Rng) -> f64 {
    match *dist {
        RateDistribution::Constant { rate } => rate,
        RateDistribution::ZeroInflatedLogNormal { log_mean, .. } => {
            if r.random::<f64>() < tr.zero[topic] {
                0.0
            } else {
                LogNormal::new(log_mean + tr.shift[topic], tr.page_sd)
                    .expect("finite log-normal")
                    .sample(r)
            }
        }
    }
}

/// Static layout of the synthetic web.
struct Layout {
    n_pages: usize,
    site: Vec<usize>,
    topic: Vec<usize>,
    site_pages: Vec<Vec<usize>>,
    /// Pages of each site sharing the page's topic, per page.
    site_topic_pages: Vec<Vec<usize>>,
    hosts: Vec<String>,
    n_ext_hosts: usize,
}

/// New links and content events of one page in one step.
#[derive(Default)]
struct PageStep {
    removed: Vec<LinkId>,
    added_pages: Vec<usize>,
    fresh_int: usize,
    fresh_ext: Vec<usize>,
    changed: bool,
    size_factor: f64,
    jitter_secs: i64,
    active: bool,
}

fn pick_links(
    cfg: &GeneratorConfig,
    lay: &Layout,
    p: usize,
    current: &[LinkId],
    k_int: usize,
    k_ext: usize,
    r: &mut ChaCha8Rng,
    step: &mut PageStep,
) {
    let linked = |q: usize, chosen: &[usize]| current.binary_search(&LinkId(q as u32)).is_ok() || chosen.contains(&q);
    for _ in 0..k_int {
        let mut placed = false;
        if r.random::<f64>() < cfg.in_series_share {
            let pool = if r.random::<f64>() < cfg.same_topic_preference {
                &lay.site_topic_pages[p]
            } else {
                &lay.site_pages[lay.site[p]]
            };
            for _ in 0..PICK_ATTEMPTS {
                let q = pool[r.random_range(0..pool.len())];
                if q != p && !linked(q, &step.added_pages) {
                    step.added_pages.push(q);
                    placed = true;
                    break;
                }
            }
        }
        if !placed {
            step.fresh_int += 1;
        }
    }
    for _ in 0..k_ext {
        let mut placed = false;
        if r.random::<f64>() < cfg.in_series_share && lay.site_pages.len() > 1 {
            for _ in 0..PICK_ATTEMPTS {
                let q = r.random_range(0..lay.n_pages);
                if lay.site[q] != lay.site[p] && !linked(q, &step.added_pages) {
                    step.added_pages.push(q);
                    placed = true;
                    break;
                }
            }
        }
        if !placed {
            step.fresh_ext.push(r.random_range(0..lay.n_ext_hosts));
        }
    }
}

/// Generates a series and the parameters that produced it.
pub fn generate(cfg: &GeneratorConfig) -> Result<(CrawlSeries, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.n_pages;
    let n_steps = cfg.n_crawls - 1;
    let mut setup = rng(derive_seed(cfg.seed, 0));

    let centroids = match &cfg.centroids {
        Some(c) => c.clone(),
        None => (0..cfg.n_topics).map(|_| unit_gaussian(&mut setup, cfg.semantic_dim)).collect(),
    };
    let n_sites = n.div_ceil(cfg.pages_per_site);
    // zero-padded numbers keep URL order equal to page order
    let sw = (n_sites - 1).max(1).to_string().len();
    let pw = (cfg.pages_per_site - 1).max(1).to_string().len();
    let hosts: Vec<String> = (0..n_sites).map(|s| format!("https://www.site{s:0sw$}.example")).collect();
    let mut site = Vec::with_capacity(n);
    let mut topic = Vec::with_capacity(n);
    let mut urls = Vec::with_capacity(n);
    let mut site_pages = vec![Vec::new(); n_sites];
    for p in 0..n {
        let s = p / cfg.pages_per_site;
        let j = p % cfg.pages_per_site;
        let home_topic = s % cfg.n_topics;
        let t = if j == 0 || setup.random::<f64>() < cfg.site_topic_share {
            home_topic
        } else {
            setup.random_range(0..cfg.n_topics)
        };
        let url = if j == 0 {
            hosts[s].clone()
        } else {
            let depth = setup.random_range(0..3);
            let mut u = format!("{}/p{j:0pw$}", hosts[s]);
            for _ in 0..depth {
                u.push_str(&format!("/sec{}", setup.random_range(0..5)));
            }
            u
        };
        site.push(s);
        topic.push(t);
        urls.push(url);
        site_pages[s].push(p);
    }
    let site_topic_pages = (0..n)
        .map(|p| site_pages[site[p]].iter().copied().filter(|&q| topic[q] == topic[p]).collect())
        .collect();
    let lay = Layout {
        n_pages: n,
        site,
        topic,
        site_pages,
        site_topic_pages,
        hosts,
        n_ext_hosts: (2 * n_sites).max(10),
    };

    let noise = Normal::new(0.0, cfg.semantic_noise).expect("finite noise");
    let vectors: Vec<std::sync::Arc<[f64]>> = (0..n)
        .map(|p| {
            let c = &centroids[lay.topic[p]];
            let v: Vec<f64> = c.iter().map(|x| x + noise.sample(&mut setup)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect::<Vec<f64>>().into()
        })
        .collect();

    let tr_int = topic_rates(&cfg.rates_int, cfg.coupling.as_ref(), cfg.n_topics, &mut setup);
    let tr_ext = topic_rates(&cfg.rates_ext, cfg.coupling.as_ref(), cfg.n_topics, &mut setup);
    let lambda_int: Vec<f64> = (0..n).map(|p| draw_rate(&cfg.rates_int, &tr_int, lay.topic[p], &mut setup)).collect();
    let lambda_ext: Vec<f64> = (0..n).map(|p| draw_rate(&cfg.rates_ext, &tr_ext, lay.topic[p], &mut setup)).collect();

    let size_dist = LogNormal::<f64>::new(9.0, 0.8).expect("finite");
    let base_size: Vec<f64> = (0..n).map(|_| size_dist.sample(&mut setup).max(1.0)).collect();
    let text_share: Vec<f64> = (0..n).map(|_| setup.random_range(0.2..0.8)).collect();
    let quality: Vec<f64> = (0..n).map(|_| setup.random_range(0.1..1.0)).collect();
    let active_share = match cfg.persistence {
        Persistence::Bursty {
            stay_active,
            stay_quiet,
            ..
        } => {
            let leave = (1.0 - stay_active) + (1.0 - stay_quiet);
            if leave > 0.0 {
                (1.0 - stay_quiet) / leave
            } else {
                0.5
            }
        }
        Persistence::Fixed => 1.0,
    };
    let mut active: Vec<bool> = (0..n).map(|_| setup.random::<f64>() < active_share).collect();

    let mut table = UrlTable::new();
    for u in &urls {
        table.intern_canonical(u)?;
    }
    let start = DateTime::parse_from_rfc3339(START).expect("constant timestamp").with_timezone(&Utc);
    let mut outlinks: Vec<Vec<LinkId>> = vec![Vec::new(); n];
    let mut size = base_size.clone();
    let mut version = vec![0u64; n];
    let mut snapshots: Vec<Vec<PageSnapshot>> = Vec::with_capacity(cfg.n_crawls);
    let mut interval_int = Vec::with_capacity(n_steps);
    let mut interval_ext = Vec::with_capacity(n_steps);

    for c in 0..cfg.n_crawls {
        let stream = derive_seed(cfg.seed, 1 + c as u64);
        // step c produces crawl c: the initial links, or interval c - 1
        let (rates_i, rates_e): (Vec<f64>, Vec<f64>) = if c == 0 {
            (vec![cfg.initial_int; n], vec![cfg.initial_ext; n])
        } else {
            let factor = |p: usize| match cfg.persistence {
                Persistence::Fixed => 1.0,
                Persistence::Bursty {
                    active_factor,
                    quiet_factor,
                    ..
                } => {
                    if active[p] {
                        active_factor
                    } else {
                        quiet_factor
                    }
                }
            };
            ((0..n).map(|p| lambda_int[p] * factor(p)).collect(), (0..n).map(|p| lambda_ext[p] * factor(p)).collect())
        };
        let steps: Vec<PageStep> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut r = rng(derive_seed(stream, p as u64));
                let mut step = PageStep {
                    size_factor: 1.0,
                    jitter_secs: r.random_range(0..3600),
                    active: active[p],
                    ..PageStep::default()
                };
                if c > 0 {
                    step.removed = outlinks[p].iter().copied().filter(|_| r.random::<f64>() < cfg.churn).collect();
                    step.changed = r.random::<f64>() < cfg.content_change_prob;
                    if step.changed {
                        step.size_factor = LogNormal::<f64>::new(0.0, 0.1).expect("finite").sample(&mut r);
                    }
                }
                let k_int = poisson(&mut r, rates_i[p]);
                let k_ext = poisson(&mut r, rates_e[p]);
                pick_links(cfg, &lay, p, &outlinks[p], k_int, k_ext, &mut r, &mut step);
                if let Persistence::Bursty {
                    stay_active,
                    stay_quiet,
                    ..
                } = cfg.persistence
                {
                    let stay = if step.active { stay_active } else { stay_quiet };
                    if r.random::<f64>() >= stay {
                        step.active = !step.active;
                    }
                }
                step
            })
            .collect();
        if c > 0 {
            interval_int.push(rates_i);
            interval_ext.push(rates_e);
        }

        let time = start + Duration::weeks(c as i64);
        let mut row = Vec::with_capacity(n);
        for (p, step) in steps.into_iter().enumerate() {
            let mut links: Vec<LinkId> = outlinks[p]
                .iter()
                .copied()
                .filter(|l| step.removed.binary_search(l).is_err())
                .collect();
            links.extend(step.added_pages.iter().map(|&q| LinkId(q as u32)));
            for k in 0..step.fresh_int {
                links.push(table.intern_canonical(&format!("{}/n/c{c}/p{p}-{k}", lay.hosts[lay.site[p]]))?);
            }
            for (k, h) in step.fresh_ext.iter().enumerate() {
                links.push(table.intern_canonical(&format!("https://www.x{h}.example.net/c{c}/p{p}-{k}"))?);
            }
            links.sort_unstable();
            links.dedup();
            outlinks[p] = links;
            if step.changed {
                version[p] += 1;
                size[p] = (size[p] * step.size_factor).max(1.0);
            }
            if c > 0 {
                active[p] = step.active;
            }
            let digest = Sha256::digest(format!("{}#{}", urls[p], version[p]).as_bytes()).to_vec();
            row.push(PageSnapshot {
                fetch_time: time + Duration::seconds(step.jitter_secs),
                outlinks: outlinks[p].clone(),
                inlinks: None,
                content_digest: digest,
                content_size: size[p].round().max(1.0) as u64,
                text_size: (size[p] * text_share[p]).round() as u64,
                text_quality: quality[p],
                semantic_vector: Some(vectors[p].clone()),
                pagerank: None,
                trustrank: None,
            });
        }
        snapshots.push(row);
    }

    let times = snapshots
        .iter()
        .map(|row| {
            let mut t: Vec<DateTime<Utc>> = row.iter().map(|s| s.fetch_time).collect();
            t.sort_unstable();
            t[(t.len() - 1) / 2]
        })
        .collect();
    let seed_page: Vec<bool> = (0..n).map(|p| p % cfg.pages_per_site == 0).collect();
    let mut series = CrawlSeries::new(urls.clone(), times, snapshots, table, "sha256")?;
    let trusted: Vec<usize> = (0..n).filter(|&p| seed_page[p]).collect();
    fill_graph_metrics(&mut series, Some(&trusted), &RankParams::default())?;
    let bursty = matches!(cfg.persistence, Persistence::Bursty { .. });
    let truth = GroundTruth {
        urls,
        topic: lay.topic,
        seed_page,
        lambda_int,
        lambda_ext,
        interval_int: bursty.then_some(interval_int),
        interval_ext: bursty.then_some(interval_ext),
    };
    Ok((series, truth))
}
