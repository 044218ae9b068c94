//! Worked fixtures stored as plain JSON next to the crate.
//!
//! A fixture names a computation, its inputs and a list of expected fields.
//! [`verify_fixtures`] runs every `*.json` file of a directory end to end and
//! reports each mismatch by fixture and field. Derived expectations are
//! regenerated by `fixtures/oracles/derive.py`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evaluation::regression_scores;
use crate::graph::{pagerank, trustrank, RankParams, SnapshotGraph};
use crate::ingest::{load_series_dir, IngestOptions};
use crate::snapshot::{classify_link, LinkScope};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    /// Follows from the definitions without computation.
    Trivial,
    /// Quoted from a published worked example.
    WorkedExample,
    /// Computed by an independent oracle script.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkCase {
    pub source: String,
    pub target: String,
}

/// The computation a fixture exercises, with its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Inputs {
    /// Fields `links[i].scope`.
    LinkScope { links: Vec<LinkCase> },
    /// Loads `dir` (relative to the fixture file). Fields are the report
    /// counts, `kept_urls`, `crawl_time[c]`, `new_int[i]` and `new_ext[i]`
    /// (new outlinks summed over kept pages).
    Ingest { dir: PathBuf },
    /// PageRank, or TrustRank when `trusted` is given. Fields `score[i]`.
    Rank {
        n_nodes: usize,
        edges: Vec<(usize, usize)>,
        #[serde(default)]
        trusted: Option<Vec<usize>>,
        damping: f64,
    },
    /// Fields `mae`, `medae` and `r2` (absent when undefined).
    Regression { y: Vec<f64>, predicted: Vec<f64> },
}

/// One expected field. Either `value` (number, string or bool, numbers
/// compared within `tol`) or an exclusive upper bound `below`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub field: String,
    #[serde(default)]
    pub value: Option<Value>,
    #[serde(default)]
    pub tol: f64,
    #[serde(default)]
    pub below: Option<f64>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub inputs: Inputs,
    pub expected: Vec<Expected>,
}

#[derive(Debug, Clone, PartialEq)]
enum Observed {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOutcome {
    pub name: String,
    pub path: PathBuf,
    /// One message per mismatching field, empty on success.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixtureReport {
    pub outcomes: Vec<FixtureOutcome>,
}

impl FixtureReport {
    /// True when no fixture failed; an empty set passes.
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.failures.is_empty())
    }
}

impl fmt::Display for FixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            if o.failures.is_empty() {
                writeln!(f, "PASS {}", o.name)?;
            } else {
                for m in &o.failures {
                    writeln!(f, "FAIL {}: {m}", o.name)?;
                }
            }
        }
        write!(f, "{} fixtures, {} failed", self.outcomes.len(), self.outcomes.iter().filter(|o| !o.failures.is_empty()).count())
    }
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    /// Runs the fixture; `base` resolves relative input paths.
    pub fn verify(&self, base: &Path) -> Vec<String> {
        let observed = match observe(&self.inputs, base) {
            Ok(o) => o,
            Err(e) => return vec![format!("inputs: {e}")],
        };
        let mut failures = Vec::new();
        if self.expected.is_empty() {
            failures.push("no expected fields".to_string());
        }
        for exp in &self.expected {
            if let Err(m) = check(exp, observed.get(&exp.field)) {
                failures.push(format!("field {}: {m}", exp.field));
            }
        }
        failures
    }
}

fn check(exp: &Expected, got: Option<&Observed>) -> std::result::Result<(), String> {
    let got = got.ok_or("not produced")?;
    match (&exp.value, exp.below, got) {
        (None, Some(b), Observed::Num(x)) if *x < b => Ok(()),
        (None, Some(b), g) => Err(format!("expected below {b}, got {g:?}")),
        (Some(Value::Number(n)), None, Observed::Num(x)) => {
            let want = n.as_f64().ok_or("expected value is not finite")?;
            if (x - want).abs() <= exp.tol {
                Ok(())
            } else {
                Err(format!("expected {want} (tol {}), got {x}", exp.tol))
            }
        }
        (Some(Value::String(s)), None, Observed::Text(t)) if s == t => Ok(()),
        (Some(Value::Bool(b)), None, Observed::Text(t)) if b.to_string() == *t => Ok(()),
        (Some(v), None, g) => Err(format!("expected {v}, got {g:?}")),
        _ => Err("needs exactly one of value or below".to_string()),
    }
}

fn observe(inputs: &Inputs, base: &Path) -> Result<BTreeMap<String, Observed>> {
    let mut out = BTreeMap::new();
    let mut num = |k: String, v: f64| out.insert(k, Observed::Num(v));
    match inputs {
        Inputs::LinkScope { links } => {
            for (i, l) in links.iter().enumerate() {
                let scope = match classify_link(&l.source, &l.target)? {
                    LinkScope::Internal => "internal",
                    LinkScope::External => "external",
                };
                out.insert(format!("links[{i}].scope"), Observed::Text(scope.to_string()));
            }
        }
        Inputs::Ingest { dir } => {
            let (series, report) = load_series_dir(&base.join(dir), &IngestOptions::default())?;
            num("pages_read".into(), report.pages_read as f64);
            num("pages_kept".into(), report.pages_kept as f64);
            num("pages_discarded_incomplete".into(), report.pages_discarded_incomplete as f64);
            num("pages_discarded_invalid".into(), report.pages_discarded_invalid as f64);
            num("outlinks_dropped".into(), report.outlinks_dropped as f64);
            let history = series.link_history();
            for i in 0..series.n_intervals() {
                for (tag, scope) in [("new_int", LinkScope::Internal), ("new_ext", LinkScope::External)] {
                    let total: u32 = (0..series.n_pages()).map(|p| history.new_count(p, i, scope)).sum();
                    num(format!("{tag}[{i}]"), f64::from(total));
                }
            }
            let urls: Vec<&str> = (0..series.n_pages()).map(|p| series.urls().url(series.page_link(p))).collect();
            out.insert("kept_urls".into(), Observed::Text(urls.join(" ")));
            out.insert("consistent".into(), Observed::Text(report.is_consistent().to_string()));
            for (c, t) in series.crawl_times().iter().enumerate() {
                out.insert(format!("crawl_time[{c}]"), Observed::Text(t.to_rfc3339()));
            }
        }
        Inputs::Rank {
            n_nodes,
            edges,
            trusted,
            damping,
        } => {
            let triples: Vec<_> = edges.iter().map(|&(s, t)| (s, t, LinkScope::Internal)).collect();
            let graph = SnapshotGraph::from_edges(*n_nodes, &triples)?;
            let params = RankParams {
                damping: *damping,
                tol: 1e-14,
                max_iter: 10_000,
            };
            let scores = match trusted {
                Some(t) => trustrank(&graph, t, &params)?,
                None => pagerank(&graph, &params)?,
            };
            for (i, s) in scores.scores.iter().enumerate() {
                num(format!("score[{i}]"), *s);
            }
        }
        Inputs::Regression { y, predicted } => {
            let s = regression_scores(y, predicted)?;
            num("mae".into(), s.mae);
            num("medae".into(), s.medae);
            if let Some(r2) = s.r2 {
                num("r2".into(), r2);
            }
        }
    }
    Ok(out)
}

/// Runs every `*.json` fixture in `dir` (sorted by file name). A fixture
/// that cannot be read or parsed is reported as failed, never skipped.
pub fn verify_fixtures(dir: &Path) -> Result<FixtureReport> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let outcomes = paths
        .into_iter()
        .map(|path| match Fixture::load(&path) {
            Ok(f) => FixtureOutcome {
                failures: f.verify(dir),
                name: f.name,
                path,
            },
            Err(e) => FixtureOutcome {
                name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                failures: vec![format!("unreadable: {e}")],
                path,
            },
        })
        .collect();
    Ok(FixtureReport { outcomes })
}
