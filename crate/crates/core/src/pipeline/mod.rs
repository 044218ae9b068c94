//! Experiment pipeline shared by the command-line tool and the test suites:
//! ingest or simulate, build features, split, tune, fit, evaluate, rank.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{
    baseline_scores, classification_scores, evaluate_rankings, make_split, regression_scores, ClassificationScores,
    Method, RankingReport, RankingResult, RegressionScores, SplitPlan, TruthColumn,
};
use crate::features::{
    assemble, lbla_subset, target_vector, without_own_history, Category, FeatureMatrix, FeatureSpec,
    SemanticReducer, TargetKind, DEFAULT_CLUSTERS,
};
use crate::learners::{fit, permutation_importance, ranked, tune, EnsembleModel, Family, Grid, HyperParams, Importance, Metric, Task};
use crate::related::{RelatedPagesIndex, DEFAULT_K};
use crate::seed::derive_seed;
use crate::snapshot::{CrawlSeries, LinkHistory, LinkScope};

pub use config::{ExperimentConfig, GridChoice, InputSource, ModelConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// First lines of every written artifact.
pub fn artifact_header(config_hash: &str, seed: u64) -> String {
    format!("# outlink {TOOL_VERSION}\n# config {config_hash}\n# seed {seed}\n")
}

/// SHA-256 of a canonical serialization, as hex.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// A series with its link history and related-pages index.
pub struct Dataset {
    pub series: CrawlSeries,
    pub history: LinkHistory,
    /// Built from the first crawl's semantic vectors when every page has one.
    pub index: Option<RelatedPagesIndex>,
}

impl Dataset {
    pub fn new(series: CrawlSeries, neighbors: usize) -> Result<Self> {
        let history = series.link_history();
        let index = if series.has_semantic_vectors() {
            Some(stage("related pages", RelatedPagesIndex::for_series(&series, 0, neighbors))?)
        } else {
            log::warn!("series lacks semantic vectors; network features are unavailable");
            None
        };
        Ok(Self { series, history, index })
    }

    pub fn n_pages(&self) -> usize {
        self.series.n_pages()
    }

    /// Ground truth of `kind` for every page at interval `t`.
    pub fn targets(&self, kind: TargetKind, scope: LinkScope, t: usize) -> Result<Vec<f64>> {
        Ok(target_vector(&self.history, kind, scope, t)?.values)
    }

    /// LCR, NL and NNL truth columns restricted to `pages`.
    pub fn truth_columns(&self, scope: LinkScope, t: usize, pages: &[usize]) -> Result<Vec<TruthColumn>> {
        [TargetKind::Lcr, TargetKind::Nl, TargetKind::Nnl]
            .into_iter()
            .map(|kind| {
                let all = self.targets(kind, scope, t)?;
                Ok(TruthColumn {
                    target: kind,
                    pages: pages.to_vec(),
                    values: pages.iter().map(|&p| all[p]).collect(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub history: usize,
    pub categories: Vec<Category>,
    /// Raw semantic components, reduced to `semantic_clusters` columns.
    pub semantic: bool,
    pub semantic_clusters: usize,
    pub pagerank: bool,
    pub target_interval: Option<usize>,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            history: 1,
            categories: Category::ALL.to_vec(),
            semantic: false,
            semantic_clusters: DEFAULT_CLUSTERS,
            pagerank: false,
            target_interval: None,
        }
    }
}

impl FeatureOptions {
    pub fn spec(&self, scope: LinkScope, lbla: bool) -> FeatureSpec {
        let mut spec = if lbla {
            FeatureSpec::lbla(self.history, scope)
        } else {
            FeatureSpec::new(&self.categories, self.history, scope)
        };
        spec.include_semantic = self.semantic && !lbla && self.categories.contains(&Category::SP);
        spec.include_pagerank = self.pagerank;
        spec.target_interval = self.target_interval;
        spec
    }
}

/// Everything needed to rebuild a model's inputs and refit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSetup {
    pub family: Family,
    pub target: TargetKind,
    pub scope: LinkScope,
    pub lbla: bool,
    pub features: FeatureOptions,
    pub params: HyperParams,
    pub grid: Grid,
}

impl ModelSetup {
    pub fn new(family: Family, target: TargetKind, scope: LinkScope, features: FeatureOptions) -> Self {
        let params = HyperParams::defaults(family);
        Self {
            family,
            target,
            scope,
            lbla: false,
            features,
            grid: Grid::single(&params),
            params,
        }
    }

    /// Setup of a trained ranking method (ExtraTrees or NGBoost).
    pub fn for_method(method: Method, scope: LinkScope, features: FeatureOptions) -> Result<Self> {
        let target = method
            .trained_target()
            .ok_or_else(|| Error::invalid(format!("{method} is a baseline, not a model")))?;
        let family = if matches!(method, Method::NnlNgb | Method::NnlNgbLbla) {
            Family::NgBoost
        } else {
            Family::ExtraTrees
        };
        Ok(Self {
            lbla: method.is_lbla(),
            ..Self::new(family, target, scope, features)
        })
    }

    pub fn task(&self) -> Task {
        if self.target == TargetKind::Nl {
            Task::Classification
        } else {
            Task::Regression
        }
    }

    pub fn with_params(mut self, params: HyperParams, grid: Grid) -> Self {
        self.params = params;
        self.grid = grid;
        self
    }

    /// Assembled matrix before semantic reduction, and the target interval.
    /// Rate targets span the whole history, so their models never see the
    /// page's own new-link counts.
    pub fn raw_matrix(&self, ds: &Dataset) -> Result<(FeatureMatrix, usize)> {
        let spec = self.features.spec(self.scope, self.lbla);
        let t = spec.validate(ds.series.n_intervals())?;
        let m = stage("features", assemble(&ds.series, &ds.history, &spec, ds.index.as_ref()))?;
        let m = if self.lbla {
            stage("features", lbla_subset(&m, self.target))?
        } else if self.target == TargetKind::Lcr {
            without_own_history(&m)
        } else {
            m
        };
        if m.n_cols() == 0 {
            return Err(Error::invalid("feature selection left no columns").in_stage("features"));
        }
        Ok((m, t))
    }
}

/// A fitted model with the setup, split and reducer that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub tool_version: String,
    /// Hash of the experiment config, or of the setup when trained directly.
    pub config_hash: String,
    pub master_seed: u64,
    pub setup: ModelSetup,
    pub split: SplitPlan,
    pub target_interval: usize,
    pub reducer: Option<SemanticReducer>,
    /// Development score per grid point (None for a single point).
    pub tuning: Vec<(HyperParams, Option<f64>)>,
    pub model: EnsembleModel,
}

impl ModelBundle {
    /// Header lines for artifacts derived from this bundle.
    pub fn header(&self) -> String {
        artifact_header(&self.config_hash, self.master_seed)
    }

    /// Records the experiment that produced the bundle.
    pub fn with_run_info(mut self, config_hash: &str, master_seed: u64) -> Self {
        self.config_hash = config_hash.to_string();
        self.master_seed = master_seed;
        self
    }

    /// The bundle's full feature matrix over every page of `ds`.
    pub fn matrix(&self, ds: &Dataset) -> Result<FeatureMatrix> {
        let (m, _) = self.setup.raw_matrix(ds)?;
        match &self.reducer {
            Some(r) => stage("semantic reduction", r.apply(&m)),
            None => Ok(m),
        }
    }

    /// Model output for `pages` (value, class-1 probability or Poisson mean).
    pub fn predict_pages(&self, ds: &Dataset, pages: &[usize]) -> Result<Vec<f64>> {
        let m = self.matrix(ds)?.select_rows(pages);
        stage("predict", self.model.predict(&m))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s).map_err(|e| Error::parse("model bundle", e))?;
        if b.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Schema(format!("model bundle format version {}", b.format_version)));
        }
        Ok(b)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Tunes on core-train against dev, then refits on core-train plus dev.
pub fn train_model(ds: &Dataset, setup: &ModelSetup, split: &SplitPlan, seed: u64) -> Result<ModelBundle> {
    let (raw, t) = setup.raw_matrix(ds)?;
    let train_rows = split.train();
    let reducer = if raw.columns().iter().any(|c| c.semantic) {
        Some(stage(
            "semantic reduction",
            SemanticReducer::fit(&raw.select_rows(&train_rows), setup.features.semantic_clusters),
        )?)
    } else {
        None
    };
    let m = match &reducer {
        Some(r) => r.apply(&raw)?,
        None => raw,
    };
    let y = ds.targets(setup.target, setup.scope, t)?;
    let pick = |rows: &[usize]| rows.iter().map(|&r| y[r]).collect::<Vec<f64>>();
    let tuned = stage(
        "tune",
        tune(
            setup.family,
            setup.task(),
            &setup.grid,
            &setup.params,
            &m.select_rows(&split.core_train),
            &pick(&split.core_train),
            &m.select_rows(&split.dev),
            &pick(&split.dev),
            derive_seed(seed, 1),
        ),
    )?;
    let model = stage(
        "fit",
        fit(setup.family, setup.task(), &m.select_rows(&train_rows), &pick(&train_rows), &tuned.best, derive_seed(seed, 2)),
    )?;
    Ok(ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config_hash: content_hash(&serde_json::to_string(setup).expect("setup serializes")),
        master_seed: seed,
        setup: setup.clone(),
        split: split.clone(),
        target_interval: t,
        reducer,
        tuning: tuned.scores.into_iter().map(|(p, s)| (p, (!s.is_nan()).then_some(s))).collect(),
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestScores {
    Regression(RegressionScores),
    Classification(ClassificationScores),
}

impl TestScores {
    /// `(name, value)` rows; undefined values are None.
    pub fn rows(&self) -> Vec<(&'static str, Option<f64>)> {
        match self {
            TestScores::Regression(r) => vec![("r2", r.r2), ("mae", Some(r.mae)), ("medae", Some(r.medae))],
            TestScores::Classification(c) => vec![
                ("precision", c.precision),
                ("recall", c.recall),
                ("f1", Some(c.f1)),
                ("balanced_accuracy", Some(c.balanced_accuracy)),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows().into_iter().find(|(n, _)| *n == name).and_then(|(_, v)| v)
    }
}

/// Point metrics of a bundle on its held-out pages.
pub fn evaluate_model(ds: &Dataset, bundle: &ModelBundle) -> Result<TestScores> {
    let test = &bundle.split.test;
    let pred = bundle.predict_pages(ds, test)?;
    let y = ds.targets(bundle.setup.target, bundle.setup.scope, bundle.target_interval)?;
    let y: Vec<f64> = test.iter().map(|&p| y[p]).collect();
    Ok(match bundle.setup.task() {
        Task::Classification => TestScores::Classification(stage("evaluate", classification_scores(&y, &pred))?),
        Task::Regression => TestScores::Regression(stage("evaluate", regression_scores(&y, &pred))?),
    })
}

/// Permutation importance on the held-out pages, sorted by importance.
pub fn bundle_importance(ds: &Dataset, bundle: &ModelBundle, repeats: usize, seed: u64) -> Result<Vec<Importance>> {
    let test = &bundle.split.test;
    let x = bundle.matrix(ds)?.select_rows(test);
    let y = ds.targets(bundle.setup.target, bundle.setup.scope, bundle.target_interval)?;
    let y: Vec<f64> = test.iter().map(|&p| y[p]).collect();
    let metric = match bundle.setup.task() {
        Task::Classification => Metric::BalancedAccuracy,
        Task::Regression => Metric::R2,
    };
    Ok(ranked(stage("importance", permutation_importance(&bundle.model, &x, &y, metric, repeats, seed))?))
}

/// Options for computing method rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingOptions {
    pub scope: LinkScope,
    pub features: FeatureOptions,
    /// Hyperparameters per family; defaults when absent.
    pub params: Vec<(Family, HyperParams)>,
    pub include_target_interval: bool,
}

impl RankingOptions {
    pub fn new(scope: LinkScope, features: FeatureOptions) -> Self {
        Self {
            scope,
            features,
            params: Vec::new(),
            include_target_interval: false,
        }
    }

    fn params_for(&self, family: Family) -> HyperParams {
        self.params
            .iter()
            .find(|(f, _)| *f == family)
            .map_or_else(|| HyperParams::defaults(family), |(_, p)| p.clone())
    }
}

/// Scores of `method` over the test pages of `split`.
pub fn method_ranking(
    ds: &Dataset,
    method: Method,
    opts: &RankingOptions,
    split: &SplitPlan,
    seed: u64,
) -> Result<RankingResult> {
    if method.is_baseline() {
        let spec = opts.features.spec(opts.scope, false);
        let t = spec.validate(ds.series.n_intervals())?;
        let all = stage(
            "baseline",
            baseline_scores(&ds.series, &ds.history, opts.scope, method, t, opts.include_target_interval),
        )?;
        return all.restrict(&split.test);
    }
    let base = ModelSetup::for_method(method, opts.scope, opts.features.clone())?;
    let params = opts.params_for(base.family);
    let setup = base.with_params(params.clone(), Grid::single(&params));
    let bundle = train_model(ds, &setup, split, seed)?;
    let mut scores = bundle.predict_pages(ds, &split.test)?;
    if method == Method::NlEt || method == Method::NlEtLbla {
        for s in &mut scores {
            *s = f64::from(u8::from(*s >= 0.5));
        }
    }
    RankingResult::new(method, split.test.clone(), scores)
}

/// Rankings of several methods on one split, scored against all targets.
pub fn rank_methods(
    ds: &Dataset,
    methods: &[Method],
    opts: &RankingOptions,
    split: &SplitPlan,
    realizations: usize,
    seed: u64,
) -> Result<(Vec<RankingResult>, RankingReport)> {
    let t = opts.features.spec(opts.scope, false).validate(ds.series.n_intervals())?;
    let results = methods
        .iter()
        .enumerate()
        .map(|(i, &m)| method_ranking(ds, m, opts, split, derive_seed(seed, 100 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let truths = ds.truth_columns(opts.scope, t, &split.test)?;
    let report = stage("evaluate rankings", evaluate_rankings(&results, &truths, realizations, derive_seed(seed, 3)))?;
    Ok((results, report))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Outputs of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// `(repetition, metric, value)`; repetition None is the mean row.
    pub metrics: Vec<(Option<usize>, String, Option<f64>)>,
    pub report: Option<RankingReport>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(r, m, _)| r.is_none() && m == metric)
            .and_then(|(_, _, v)| *v)
    }
}

/// Page split of repetition `rep`.
pub fn repetition_split(ds: &Dataset, cfg: &ExperimentConfig, rep: usize) -> Result<SplitPlan> {
    make_split(ds.n_pages(), derive_seed(cfg.seed, 10 + rep as u64))
}

/// The configured model trained on the split of repetition `rep`.
pub fn train_repetition(ds: &Dataset, cfg: &ExperimentConfig, features: &FeatureOptions, rep: usize) -> Result<ModelBundle> {
    let setup = cfg.model.setup(features.clone())?;
    let split = repetition_split(ds, cfg, rep)?;
    Ok(train_model(ds, &setup, &split, derive_seed(cfg.seed, 20 + rep as u64))?.with_run_info(&cfg.hash(), cfg.seed))
}

/// Ranking options implied by an experiment config.
pub fn ranking_options(cfg: &ExperimentConfig) -> RankingOptions {
    let mut opts = RankingOptions::new(cfg.model.scope, cfg.features.clone());
    opts.include_target_interval = cfg.include_target_interval;
    if let Some(p) = &cfg.model.params {
        opts.params.push((cfg.model.family, p.clone()));
    }
    opts
}

/// Method rankings on the first repetition's split.
pub fn rank_configured(ds: &Dataset, cfg: &ExperimentConfig, methods: &[Method]) -> Result<(Vec<RankingResult>, RankingReport)> {
    let split = repetition_split(ds, cfg, 0)?;
    rank_methods(ds, methods, &ranking_options(cfg), &split, cfg.realizations, derive_seed(cfg.seed, 5))
}

/// Writes one ranking file per method plus the Spearman, curve and area
/// tables into `out`.
pub fn write_rankings(
    out: &Path,
    results: &[RankingResult],
    report: &RankingReport,
    series: &CrawlSeries,
    header: &str,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for r in results {
        let p = out.join(format!("ranking_{}.tsv", r.method.tag()));
        write_file(&p, ranking_table(r, series, header).as_bytes())?;
        files.push(p);
    }
    let mut buf = Vec::new();
    for name in ["spearman.tsv", "curves.tsv", "areas.tsv"] {
        buf.clear();
        match name {
            "spearman.tsv" => report.write_spearman_tsv(header, &mut buf)?,
            "curves.tsv" => report.write_curves_tsv(header, &mut buf)?,
            _ => report.write_areas_tsv(header, &mut buf)?,
        }
        let p = out.join(name);
        write_file(&p, &buf)?;
        files.push(p);
    }
    Ok(files)
}

/// Writes `(repetition, metric, value)` rows as a table.
pub fn metrics_table(rows: &[(Option<usize>, String, Option<f64>)], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("repetition\tmetric\tvalue\n");
    for (r, m, v) in rows {
        let rep = r.map_or_else(|| "mean".to_string(), |r| r.to_string());
        s.push_str(&format!("{rep}\t{m}\t{}\n", fmt_opt(*v)));
    }
    s
}

/// Trains and evaluates the configured model over `repetitions` splits.
fn repeat_model(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    features: &FeatureOptions,
) -> Result<(Vec<(Option<usize>, String, Option<f64>)>, Vec<ModelBundle>)> {
    let mut rows = Vec::new();
    let mut bundles = Vec::new();
    let mut sums: Vec<(String, f64, usize)> = Vec::new();
    for rep in 0..cfg.repetitions {
        let bundle = train_repetition(ds, cfg, features, rep)?;
        let scores = evaluate_model(ds, &bundle)?;
        for (name, v) in scores.rows() {
            rows.push((Some(rep), name.to_string(), v));
            match sums.iter_mut().find(|(n, _, _)| n == name) {
                Some(e) => {
                    if let Some(v) = v {
                        e.1 += v;
                        e.2 += 1;
                    }
                }
                None => sums.push((name.to_string(), v.unwrap_or(0.0), usize::from(v.is_some()))),
            }
        }
        bundles.push(bundle);
    }
    for (name, total, count) in sums {
        rows.push((None, name, (count > 0).then(|| total / count as f64)));
    }
    Ok((rows, bundles))
}

/// Loads or generates the configured series.
pub fn load_input(cfg: &ExperimentConfig) -> Result<CrawlSeries> {
    match &cfg.input {
        InputSource::Directory { path } => {
            let (series, report) = stage("ingest", crate::ingest::load_series_dir(path, &Default::default()))?;
            log::info!("ingested {} pages from {}", report.pages_kept, path.display());
            Ok(series)
        }
        InputSource::Generator { generator } => Ok(stage("simulate", crate::synthetic::generate(generator))?.0),
    }
}

/// Full experiment: model repetitions, history sweep, rankings and
/// importance, each written to `cfg.output_dir` with the config hash.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let hash = cfg.hash();
    let header = artifact_header(&hash, cfg.seed);
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ds = Dataset::new(load_input(cfg)?, cfg.neighbors)?;
    let mut files = Vec::new();

    let cfg_path = out.join("config.toml");
    write_file(&cfg_path, format!("{header}{}", cfg.to_toml()).as_bytes())?;
    files.push(cfg_path);

    let (metrics, bundles) = repeat_model(&ds, cfg, &cfg.features)?;
    let p = out.join("metrics.tsv");
    write_file(&p, metrics_table(&metrics, &header).as_bytes())?;
    files.push(p);
    for (r, b) in bundles.iter().enumerate() {
        let p = out.join(format!("model_rep{r}.json"));
        b.write(&p)?;
        files.push(p);
    }

    for &h in &cfg.history_sweep {
        let features = FeatureOptions {
            history: h,
            ..cfg.features.clone()
        };
        let (rows, _) = repeat_model(&ds, cfg, &features)?;
        let p = out.join(format!("metrics_h{h:02}.tsv"));
        write_file(&p, metrics_table(&rows, &header).as_bytes())?;
        files.push(p);
    }

    if cfg.importance_repeats > 0 {
        if let Some(b) = bundles.first() {
            let imp = bundle_importance(&ds, b, cfg.importance_repeats, derive_seed(cfg.seed, 4))?;
            let p = out.join("importance.tsv");
            write_file(&p, importance_table(&imp, &header).as_bytes())?;
            files.push(p);
        }
    }

    let methods = cfg.methods()?;
    let report = if methods.is_empty() {
        None
    } else {
        let (results, report) = rank_configured(&ds, cfg, &methods)?;
        files.extend(write_rankings(out, &results, &report, &ds.series, &header)?);
        Some(report)
    };
    Ok(RunSummary { metrics, report, files })
}

pub fn importance_table(imp: &[Importance], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("rank\tfeature\timportance\tstd\n");
    for (i, r) in imp.iter().enumerate() {
        s.push_str(&format!("{}\t{}\t{}\t{}\n", i + 1, r.feature, r.importance, r.std));
    }
    s
}

pub fn ranking_table(r: &RankingResult, series: &CrawlSeries, header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(&format!("# method {}\nrank\turl\tscore\n", r.method.tag()));
    for (rank, &i) in r.order.iter().enumerate() {
        s.push_str(&format!("{}\t{}\t{}\n", rank + 1, series.pages()[r.pages[i]].url, r.scores[i]));
    }
    s
}

/// Writes text to any writer.
pub fn emit<W: Write>(mut w: W, text: &str) -> Result<()> {
    w.write_all(text.as_bytes()).map_err(|e| Error::io("<output>", e))
}

/// Default neighbor count for datasets built by the pipeline.
pub const DEFAULT_NEIGHBORS: usize = DEFAULT_K;
