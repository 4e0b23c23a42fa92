//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::PipelineConfig;
use super::report::{html_report, ImageCard};
use crate::acquisition::{self, ProviderConfig, ProviderKind, SearchApproach};
use crate::corpus::{Corpus, Label, LabelEntry, Query};
use crate::pipeline::{self, PipelineError};
use crate::reranker::RerankModel;

#[derive(Debug, Parser)]
#[command(name = "puresearch", version, about = "Rerank text-based image search results")]
struct Cli {
    /// JSON configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory (overrides PURESEARCH_STORE and the config file).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Seed for clustering and cross-validation folds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ApproachArg {
    Web,
    Seed,
    Direct,
}

impl From<ApproachArg> for SearchApproach {
    fn from(a: ApproachArg) -> Self {
        match a {
            ApproachArg::Web => SearchApproach::WebSearch,
            ApproachArg::Seed => SearchApproach::ImageSearchSeed,
            ApproachArg::Direct => SearchApproach::DirectImageSearch,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Relevant,
    Irrelevant,
    Difficult,
}

impl From<LabelArg> for Label {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Relevant => Label::Relevant,
            LabelArg::Irrelevant => Label::Irrelevant,
            LabelArg::Difficult => Label::Difficult,
        }
    }
}

#[derive(Debug, Args)]
struct QueryArg {
    /// Query id (or query text, which is normalized to its id).
    #[arg(long, short)]
    query: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Store images from a fixture directory or a plain directory of images.
    Ingest {
        /// Query text.
        #[arg(long, short)]
        query: String,
        /// Saved search results (hits.jsonl, pages/, images/).
        #[arg(long, conflicts_with = "dir", required_unless_present = "dir")]
        fixture: Option<PathBuf>,
        /// Directory of image files, ranked by file name.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "direct")]
        approach: ApproachArg,
    },
    /// Acquire images from the configured search provider.
    Crawl {
        #[arg(long, short)]
        query: String,
        #[arg(long, value_enum, default_value = "direct")]
        approach: ApproachArg,
        /// Results-page URL template containing {query}.
        #[arg(long)]
        provider_url: Option<String>,
        #[arg(long)]
        max_results: Option<usize>,
        /// Requests per second.
        #[arg(long)]
        rate_limit: Option<f64>,
    },
    /// Compute and print visual and textual features (JSON lines).
    Features {
        #[command(flatten)]
        query: QueryArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the symbolic/natural verdict of every image (JSON lines).
    Filter {
        #[command(flatten)]
        query: QueryArg,
        /// Only list symbolic images.
        #[arg(long)]
        symbolic_only: bool,
    },
    /// Learn reranking weights from every labeled query in the store.
    Train {
        #[arg(long)]
        lambda: Option<f64>,
        /// Model file (default: <store>/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerank a query and write its ranking as JSON lines.
    Rerank {
        #[command(flatten)]
        query: QueryArg,
        /// Model file (default: <store>/model.json, or text-only weights if absent).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output (default: <store>/rankings/<query>.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a ranking against the stored labels.
    Eval {
        #[command(flatten)]
        query: QueryArg,
        /// Ranking file (default: the stored ranking, or the text order).
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate the weight learner over all labeled images.
    Cv {
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Report file (default: <store>/cv_report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the static HTML gallery comparing text and reranked order.
    Report {
        #[command(flatten)]
        query: QueryArg,
        /// Output (default: <store>/reports/<query>.html).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API and UI assets.
    Serve {
        /// Address to bind, e.g. 127.0.0.1:8080.
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Append one label to the store's label log.
    Label {
        #[command(flatten)]
        query: QueryArg,
        #[arg(long)]
        image: String,
        #[arg(long, value_enum)]
        label: LabelArg,
        #[arg(long, default_value = "cli")]
        annotator: String,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::corpus::CorpusError> for CliError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<acquisition::AcquisitionError> for CliError {
    fn from(e: acquisition::AcquisitionError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::{DisplayHelp, DisplayHelpOnMissingArgumentOrSubcommand, DisplayVersion};
            return match e.kind() {
                DisplayHelp | DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    match execute(cli, out) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(CliError::Data(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
    }
}

fn resolve_query(corpus: &Corpus, arg: &QueryArg) -> Result<String, CliError> {
    if corpus.query(&arg.query).is_some() {
        return Ok(arg.query.clone());
    }
    let id = Query::new(&arg.query).map(|q| q.id).unwrap_or_default();
    if corpus.query(&id).is_some() {
        return Ok(id);
    }
    Err(CliError::Data(format!("unknown query {:?}", arg.query)))
}

fn write_output(path: Option<&Path>, contents: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            std::fs::write(p, contents).map_err(io_err(p))
        }
        None => out.write_all(contents.as_bytes()).map_err(|e| CliError::Data(e.to_string())),
    }
}

fn load_model_or_default(path: &Path, explicit: bool) -> Result<RerankModel, CliError> {
    match pipeline::load_model(path)? {
        Some(m) => Ok(m),
        None if explicit => Err(CliError::Data(format!("model {} not found", path.display()))),
        None => {
            log::info!("no trained model; using text-only weights");
            Ok(RerankModel::text_only())
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref()).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(s) = cli.store {
        cfg.store = s;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let store = cfg.store.clone();
    let open = || Corpus::open(&store).map_err(CliError::from);

    match cli.command {
        Command::Ingest {
            query,
            fixture,
            dir,
            approach,
        } => {
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let q = Query::new(&query).map_err(|e| CliError::Usage(e.to_string()))?;
            let images = match (fixture, dir) {
                (Some(f), _) => {
                    let pc = ProviderConfig {
                        kind: ProviderKind::Fixture,
                        location: f.display().to_string(),
                        ..cfg.provider()
                    };
                    acquisition::acquire(&q, approach.into(), &pc)?
                }
                (None, Some(d)) => acquisition::ingest_directory(&d, &q, cfg.min_size)?,
                (None, None) => return Err(CliError::Usage("give --fixture or --dir".into())),
            };
            let mut corpus = Corpus::open_or_create(&store)?;
            let ids = pipeline::ingest(&mut corpus, &q, images)?;
            let _ = writeln!(out, "ingested {} images for query {}", ids.len(), q.id);
        }
        Command::Crawl {
            query,
            approach,
            provider_url,
            max_results,
            rate_limit,
        } => {
            if let Some(u) = provider_url {
                cfg.provider.kind = ProviderKind::GenericHtml;
                cfg.provider.location = u;
            }
            if let Some(m) = max_results {
                cfg.provider.max_results = m;
            }
            if let Some(r) = rate_limit {
                cfg.provider.rate_limit = r;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let q = Query::new(&query).map_err(|e| CliError::Usage(e.to_string()))?;
            let images = acquisition::acquire(&q, approach.into(), &cfg.provider())?;
            let mut corpus = Corpus::open_or_create(&store)?;
            let ids = pipeline::ingest(&mut corpus, &q, images)?;
            let _ = writeln!(out, "crawled {} images for query {}", ids.len(), q.id);
        }
        Command::Features { query, out: path } => {
            let corpus = open()?;
            let qid = resolve_query(&corpus, &query)?;
            let images = pipeline::describe_query(&corpus, &qid, &cfg.analysis())?;
            write_output(path.as_deref(), &pipeline::features_jsonl(&images), out)?;
        }
        Command::Filter { query, symbolic_only } => {
            let corpus = open()?;
            let qid = resolve_query(&corpus, &query)?;
            for a in pipeline::describe_query(&corpus, &qid, &cfg.analysis())? {
                if symbolic_only && !a.verdict.is_symbolic() {
                    continue;
                }
                let line = serde_json::json!({
                    "image_id": a.record.id,
                    "original_rank": a.record.original_rank,
                    "class": a.verdict.class,
                    "score": a.verdict.score,
                });
                let _ = writeln!(out, "{line}");
            }
        }
        Command::Train { lambda, out: path } => {
            if let Some(l) = lambda {
                cfg.lambda = l;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let corpus = open()?;
            let model = pipeline::train_model(&corpus, &cfg.analysis(), cfg.lambda)?;
            let path = path.unwrap_or_else(|| pipeline::model_path(&store));
            write_output(Some(&path), &model.to_json(), out)?;
            let _ = writeln!(
                out,
                "model {} trained on {} rows ({} intermediate left out) -> {}",
                model.version,
                model.training_rows,
                model.eliminated_rows,
                path.display()
            );
        }
        Command::Rerank { query, model, out: path } => {
            let corpus = open()?;
            let qid = resolve_query(&corpus, &query)?;
            let explicit = model.is_some();
            let model_path = model.unwrap_or_else(|| pipeline::model_path(&store));
            let model = load_model_or_default(&model_path, explicit)?;
            let ranking = pipeline::rerank_query(&corpus, &qid, &model, &cfg.analysis())?;
            let path = path.unwrap_or_else(|| pipeline::ranking_path(&store, &qid));
            pipeline::save_ranking(&path, &ranking)?;
            let _ = writeln!(out, "reranked {} images with model {} -> {}", ranking.len(), model.version, path.display());
        }
        Command::Eval { query, ranking, out: path } => {
            let corpus = open()?;
            let qid = resolve_query(&corpus, &query)?;
            let ranking = match ranking {
                Some(p) => pipeline::load_ranking(&p)?.ok_or_else(|| CliError::Data(format!("{} not found", p.display())))?,
                None => match pipeline::load_ranking(&pipeline::ranking_path(&store, &qid))? {
                    Some(r) => r,
                    None => crate::reranker::RankedList::baseline(
                        &qid,
                        corpus.list_records(&qid)?.into_iter().map(|r| (r.id, r.original_rank)),
                    ),
                },
            };
            let report = pipeline::evaluate(&ranking, &corpus.effective_labels(&qid))?;
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            match path {
                Some(p) => {
                    write_output(Some(&p), &json, out)?;
                    let _ = write!(out, "{}", report.to_table());
                }
                None => write_output(None, &json, out)?,
            }
        }
        Command::Cv {
            folds,
            repeats,
            lambda,
            out: path,
        } => {
            if let Some(f) = folds {
                cfg.folds = f;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            if let Some(l) = lambda {
                cfg.lambda = l;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let corpus = open()?;
            let result = pipeline::cross_validate_store(&corpus, &cfg.analysis(), &cfg.cv())?;
            let path = path.unwrap_or_else(|| store.join("cv_report.json"));
            let json = serde_json::to_string_pretty(&result).expect("cv result serializes") + "\n";
            write_output(Some(&path), &json, out)?;
            let _ = write!(out, "{}", result.report.to_table());
            let _ = writeln!(out, "-> {}", path.display());
        }
        Command::Report { query, out: path } => {
            let corpus = open()?;
            let qid = resolve_query(&corpus, &query)?;
            let q = corpus.query(&qid).expect("resolved").clone();
            let path = path.unwrap_or_else(|| store.join("reports").join(format!("{qid}.html")));
            let images = pipeline::describe_query(&corpus, &qid, &cfg.analysis())?;
            let baseline = crate::reranker::RankedList::baseline(
                &qid,
                images.iter().map(|a| (a.record.id.clone(), a.record.original_rank)),
            );
            let reranked = match pipeline::load_ranking(&pipeline::ranking_path(&store, &qid))? {
                Some(r) => r,
                None => {
                    let model = load_model_or_default(&pipeline::model_path(&store), false)?;
                    let analysis = pipeline::analyze_described(&qid, &images, &cfg.analysis())?;
                    crate::reranker::rerank(&analysis, &model).map_err(PipelineError::from)?
                }
            };
            let labels = corpus.effective_labels(&qid);
            let report_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let cards: HashMap<String, ImageCard> = images
                .iter()
                .map(|a| {
                    let blob = std::path::absolute(corpus.blob_path(&a.record)).unwrap_or(corpus.blob_path(&a.record));
                    let dir = std::path::absolute(&report_dir).unwrap_or(report_dir.clone());
                    (
                        a.record.id.clone(),
                        ImageCard {
                            href: relative_href(&dir, &blob),
                            symbolic: a.verdict.is_symbolic(),
                            label: labels.get(&a.record.id).copied(),
                        },
                    )
                })
                .collect();
            let html = html_report(&q, &baseline, &reranked, &cards).map_err(|e| CliError::Data(e.to_string()))?;
            write_output(Some(&path), &html, out)?;
            let _ = writeln!(out, "report -> {}", path.display());
        }
        Command::Serve { bind, static_dir } => {
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if static_dir.is_some() {
                cfg.static_dir = static_dir;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
            rt.block_on(super::service::serve(cfg)).map_err(|e| CliError::Data(e.to_string()))?;
        }
        Command::Label {
            query,
            image,
            label,
            annotator,
        } => {
            let mut corpus = open()?;
            let qid = resolve_query(&corpus, &query)?;
            if corpus.record(&qid, &image).is_none() {
                return Err(CliError::Data(format!("image {image} is not part of query {qid}")));
            }
            corpus.append_label(LabelEntry::now(&qid, &image, label.into(), &annotator))?;
        }
    }
    Ok(())
}

/// Path of `target` relative to directory `from`, with `/` separators.
fn relative_href(from: &Path, target: &Path) -> String {
    let from: Vec<_> = from.components().collect();
    let to: Vec<_> = target.components().collect();
    let common = from.iter().zip(&to).take_while(|(a, b)| a == b).count();
    let mut parts: Vec<String> = vec!["..".into(); from.len() - common];
    parts.extend(to[common..].iter().map(|c| c.as_os_str().to_string_lossy().into_owned()));
    parts.join("/")
}
