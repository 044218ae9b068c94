use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use outlink::features::{Category, TargetKind};
use outlink::ingest::{load_series_dir, write_crawl_series, IngestOptions};
use outlink::learners::Family;
use outlink::pipeline::{
    artifact_header, bundle_importance, content_hash, evaluate_model, importance_table, load_input, metrics_table,
    rank_configured, run_experiment, train_repetition, write_rankings, Dataset, ExperimentConfig, GridChoice,
    InputSource, ModelBundle,
};
use outlink::seed::derive_seed;
use outlink::synthetic::{calibration_report, generate, GeneratorConfig, Persistence, TopicCoupling, GROUND_TRUTH_FILE};
use outlink::LinkScope;

/// Predict new outgoing hyperlinks from periodic crawl snapshots.
#[derive(Parser)]
#[command(name = "outlink", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic crawl series with ground truth.
    Simulate(SimulateArgs),
    /// Validate and normalize a directory of crawl snapshots.
    Ingest(IngestArgs),
    /// Calibration summary of a series (new-link moments, CCDF, transitions).
    Report(ReportArgs),
    /// Write the feature matrix of the configured model.
    Features {
        #[command(flatten)]
        exp: ExpArgs,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune and fit the configured model; writes a model bundle.
    Train {
        #[command(flatten)]
        exp: ExpArgs,
        /// Which repetition's split to train on.
        #[arg(long, default_value_t = 0)]
        repetition: usize,
        /// Bundle path (default: <output-dir>/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model bundle on its held-out pages.
    Evaluate {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank the test pages by every configured method and score the rankings.
    Rank {
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Permutation importance of a model bundle's features.
    Importance {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        model: PathBuf,
        /// Rows shown on stdout.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Full table (default: not written).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full experiment: repetitions, history sweep, importance, rankings.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Generator config (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of pages.
    #[arg(long)]
    pages: Option<usize>,
    /// Number of crawls.
    #[arg(long)]
    crawls: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    topics: Option<usize>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Topic-coupled rates.
    #[arg(long)]
    coupled: bool,
    /// Regime-switching (bursty) rates.
    #[arg(long)]
    bursty: bool,
    /// Output directory for crawl files, ground truth and calibration.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of crawl snapshot files.
    #[arg(long)]
    input: PathBuf,
    /// Embed pages that carry text but no semantic vector.
    #[arg(long)]
    embed_missing: bool,
    /// Discard pages lacking a semantic vector in any crawl.
    #[arg(long)]
    require_semantic: bool,
    /// Re-emit the normalized series (with graph metrics) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of crawl snapshot files.
    #[arg(long)]
    input: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Single,
    Standard,
}

/// Experiment settings; each flag overrides the matching config field.
#[derive(Args)]
struct ExpArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of crawl snapshot files (instead of the generator).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Split-tune-train-test repetitions.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Tie-breaking realizations of Precision@k%.
    #[arg(long)]
    realizations: Option<usize>,
    /// Related pages per page.
    #[arg(long)]
    neighbors: Option<usize>,
    /// Intervals of DP/DN history.
    #[arg(long)]
    history: Option<usize>,
    /// Feature categories, comma separated (SP,SN,DP,DN).
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<Category>>,
    /// Include the semantic vector (reduced by clustering).
    #[arg(long)]
    semantic: bool,
    /// Include PageRank and TrustRank columns.
    #[arg(long)]
    pagerank: bool,
    /// Interval to predict (default: the last one).
    #[arg(long)]
    target_interval: Option<usize>,
    /// Learner family (extra-trees, hist-gb, ngboost).
    #[arg(long)]
    family: Option<Family>,
    /// Target (lcr, nl, nnl).
    #[arg(long)]
    target: Option<TargetKind>,
    /// Link scope (internal, external).
    #[arg(long)]
    scope: Option<LinkScope>,
    /// Restrict the model to look-back/look-around features.
    #[arg(long)]
    lbla: bool,
    /// Hyperparameter grid to tune over.
    #[arg(long, value_enum)]
    grid: Option<GridArg>,
    /// Ranking methods, comma separated (e.g. NNL-ET_LBLA,NNL-Av).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Extra history sizes to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    history_sweep: Option<Vec<usize>>,
    /// Permutation repeats for importance; 0 skips it.
    #[arg(long)]
    importance_repeats: Option<usize>,
    /// Let CCR read the target interval as well.
    #[arg(long)]
    include_target_interval: bool,
    /// Directory for reports and models.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ExpArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ExperimentConfig::from_toml(&text).with_context(|| format!("config {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.input {
            c.input = InputSource::Directory { path: p.clone() };
        }
        set(&mut c.seed, self.seed);
        set(&mut c.repetitions, self.repetitions);
        set(&mut c.realizations, self.realizations);
        set(&mut c.neighbors, self.neighbors);
        set(&mut c.features.history, self.history);
        set(&mut c.features.categories, self.categories.clone());
        c.features.semantic |= self.semantic;
        c.features.pagerank |= self.pagerank;
        if self.target_interval.is_some() {
            c.features.target_interval = self.target_interval;
        }
        set(&mut c.model.family, self.family);
        set(&mut c.model.target, self.target);
        set(&mut c.model.scope, self.scope);
        c.model.lbla |= self.lbla;
        if let Some(g) = self.grid {
            c.model.grid = match g {
                GridArg::Single => GridChoice::Single,
                GridArg::Standard => GridChoice::Standard,
            };
        }
        if self.methods.is_some() {
            c.methods = self.methods.clone();
        }
        set(&mut c.history_sweep, self.history_sweep.clone());
        set(&mut c.importance_repeats, self.importance_repeats);
        c.include_target_interval |= self.include_target_interval;
        set(&mut c.output_dir, self.output_dir.clone());
        c.validate()?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// `println!` that tolerates a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {
        write_out(None, &format!("{}\n", format_args!($($arg)*)))?
    };
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => match io::stdout().write_all(text.as_bytes()) {
            // a closed pipe (`outlink ... | head`) is not an error
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            r => r.context("writing to stdout"),
        },
    }
}

fn dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(Dataset::new(load_input(cfg)?, cfg.neighbors)?)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut g = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GeneratorConfig::from_toml(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => GeneratorConfig::default(),
    };
    set(&mut g.n_pages, a.pages);
    set(&mut g.n_crawls, a.crawls);
    set(&mut g.n_topics, a.topics);
    set(&mut g.seed, a.seed);
    if a.coupled {
        g.coupling = Some(TopicCoupling::default());
    }
    if a.bursty {
        g.persistence = Persistence::bursty();
    }
    g.validate()?;
    let toml = g.to_toml();
    let header = artifact_header(&content_hash(&toml), g.seed);
    let (series, truth) = generate(&g)?;
    let files = write_crawl_series(&series, &a.out)?;
    let mut gt = header.clone().into_bytes();
    truth.write_tsv(&mut gt)?;
    fs::write(a.out.join(GROUND_TRUTH_FILE), gt).context("writing ground truth")?;
    let report = calibration_report(&series);
    fs::write(a.out.join("calibration.tsv"), format!("{header}{}", report.to_text())).context("writing calibration")?;
    fs::write(a.out.join("generator.toml"), format!("{header}{toml}")).context("writing generator config")?;
    say!(
        "{} pages, {} crawls, {} files in {}",
        series.n_pages(),
        series.n_crawls(),
        files.len() + 3,
        a.out.display()
    );
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let opts = IngestOptions {
        require_semantic: a.require_semantic,
        embed_missing: a.embed_missing,
        ..IngestOptions::default()
    };
    let (series, report) = load_series_dir(&a.input, &opts)?;
    write_out(None, &report.to_text())?;
    if let Some(out) = &a.out {
        let files = write_crawl_series(&series, out)?;
        say!("wrote {} crawl files to {}", files.len(), out.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Ingest(a) => ingest(&a),
        Command::Report(a) => {
            let (series, _) = load_series_dir(&a.input, &IngestOptions::default())?;
            write_out(a.out.as_deref(), &calibration_report(&series).to_text())
        }
        Command::Features { exp, out } => {
            let cfg = exp.build()?;
            let ds = dataset(&cfg)?;
            let setup = cfg.model.setup(cfg.features.clone())?;
            let (m, t) = setup.raw_matrix(&ds)?;
            log::info!("{} rows, {} columns, target interval {t}", m.n_rows(), m.n_cols());
            let mut buf = artifact_header(&cfg.hash(), cfg.seed).into_bytes();
            m.write_text(&mut buf)?;
            write_out(out.as_deref(), &String::from_utf8(buf)?)
        }
        Command::Train { exp, repetition, out } => {
            let cfg = exp.build()?;
            let ds = dataset(&cfg)?;
            let bundle = train_repetition(&ds, &cfg, &cfg.features, repetition)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("model.json"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            bundle.write(&path)?;
            for (params, score) in &bundle.tuning {
                log::info!("dev score {score:?} for {params:?}");
            }
            say!("{:?} model on {} features -> {}", bundle.model.kind, bundle.model.feature_names.len(), path.display());
            Ok(())
        }
        Command::Evaluate { exp, model, out } => {
            let cfg = exp.build()?;
            let bundle = ModelBundle::read(&model)?;
            let ds = dataset(&cfg)?;
            let rows: Vec<_> = evaluate_model(&ds, &bundle)?
                .rows()
                .into_iter()
                .map(|(n, v)| (Some(0), n.to_string(), v))
                .collect();
            write_out(out.as_deref(), &metrics_table(&rows, &bundle.header()))
        }
        Command::Rank { exp } => {
            let cfg = exp.build()?;
            let ds = dataset(&cfg)?;
            let (results, report) = rank_configured(&ds, &cfg, &cfg.methods()?)?;
            fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
            let header = artifact_header(&cfg.hash(), cfg.seed);
            write_rankings(&cfg.output_dir, &results, &report, &ds.series, &header)?;
            let mut buf = Vec::new();
            report.write_areas_tsv("", &mut buf)?;
            io::stdout().write_all(&buf)?;
            Ok(())
        }
        Command::Importance { exp, model, top, out } => {
            let cfg = exp.build()?;
            let bundle = ModelBundle::read(&model)?;
            let ds = dataset(&cfg)?;
            let repeats = cfg.importance_repeats.max(1);
            let imp = bundle_importance(&ds, &bundle, repeats, derive_seed(bundle.master_seed, 4))?;
            let table = importance_table(&imp, &bundle.header());
            if let Some(p) = &out {
                write_out(Some(p), &table)?;
            }
            let shown: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).take(top + 1).collect();
            say!("{}", shown.join("\n"));
            Ok(())
        }
        Command::Run { exp } => {
            let cfg = exp.build()?;
            let summary = run_experiment(&cfg)?;
            for (rep, metric, value) in &summary.metrics {
                if rep.is_none() {
                    say!("{metric}\t{}", value.map_or_else(|| "NA".into(), |v| format!("{v:.4}")));
                }
            }
            say!("{} files in {}", summary.files.len(), cfg.output_dir.display());
            Ok(())
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<outlink::Error>())
        .map_or(3, |e| u8::try_from(e.exit_code()).unwrap_or(3))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
