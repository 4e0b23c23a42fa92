//! Store-level orchestration: describe images, analyze queries, train,
//! rerank, evaluate and cross-validate.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquiredImage, AcquisitionError};
use crate::corpus::{Corpus, CorpusError, ImageRecord, Label, Query};
use crate::evaluation::{EvalError, EvalReport};
use crate::numfmt::round_sig;
use crate::reranker::{
    self, analyze, CandidateImage, CvParams, CvResult, LabeledRow, QueryAnalysis, RankedList, RerankError, RerankModel,
    RerankParams,
};
use crate::textual::{text_bits, TextBits};
use crate::visual::{classify_symbolic, decode, NaturalnessVerdict, SkewSearch, SymbolicThresholds, VisualError, VisualFeatures};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Visual(#[from] VisualError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no labels: {0}")]
    Unlabeled(String),
    #[error("no images: {0}")]
    NoImages(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Settings shared by every per-query computation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub params: RerankParams,
    pub thresholds: SymbolicThresholds,
    pub skew: SkewSearch,
}

/// Everything measured on one stored image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnalysis {
    pub record: ImageRecord,
    pub visual: VisualFeatures,
    pub text: TextBits,
    pub verdict: NaturalnessVerdict,
}

impl ImageAnalysis {
    pub fn candidate(&self) -> CandidateImage {
        CandidateImage {
            image_id: self.record.id.clone(),
            original_rank: self.record.original_rank,
            text: self.text,
            visual: self.visual.ranking_vector(),
            verdict: self.verdict,
        }
    }
}

pub fn describe(record: &ImageRecord, query: &Query, bytes: &[u8], cfg: &AnalysisConfig) -> Result<ImageAnalysis> {
    let img = decode(bytes)?;
    let visual = VisualFeatures::compute_with(&img, &cfg.skew)?;
    let verdict = classify_symbolic(&visual, &cfg.thresholds);
    Ok(ImageAnalysis {
        record: record.clone(),
        text: text_bits(record, query),
        visual,
        verdict,
    })
}

fn query_of<'a>(corpus: &'a Corpus, query_id: &str) -> Result<&'a Query> {
    corpus
        .query(query_id)
        .ok_or_else(|| PipelineError::NotFound(format!("query {query_id}")))
}

/// Describes every image of a query, in original-rank order.
pub fn describe_query(corpus: &Corpus, query_id: &str, cfg: &AnalysisConfig) -> Result<Vec<ImageAnalysis>> {
    let query = query_of(corpus, query_id)?;
    corpus
        .list_records(query_id)?
        .iter()
        .map(|r| describe(r, query, &corpus.read_blob(r)?, cfg))
        .collect()
}

pub fn analyze_described(query_id: &str, images: &[ImageAnalysis], cfg: &AnalysisConfig) -> Result<QueryAnalysis> {
    Ok(analyze(query_id, images.iter().map(ImageAnalysis::candidate).collect(), &cfg.params)?)
}

pub fn analyze_query(corpus: &Corpus, query_id: &str, cfg: &AnalysisConfig) -> Result<(Vec<ImageAnalysis>, QueryAnalysis)> {
    let images = describe_query(corpus, query_id, cfg)?;
    let analysis = analyze_described(query_id, &images, cfg)?;
    Ok((images, analysis))
}

/// Training rows for the labeled, non-difficult candidates of one analysis.
pub fn labeled_rows(analysis: &QueryAnalysis, labels: &HashMap<String, Label>) -> Vec<LabeledRow> {
    analysis
        .candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let relevant = match labels.get(&c.image_id)? {
                Label::Relevant => true,
                Label::Irrelevant => false,
                Label::Difficult => return None,
            };
            Some(LabeledRow {
                query_id: analysis.query_id.clone(),
                image_id: c.image_id.clone(),
                original_rank: c.original_rank,
                features: analysis.features[i],
                relevant,
                intermediate: analysis.is_intermediate(i),
            })
        })
        .collect()
}

/// Labeled rows of every query in the store that has labels.
pub fn training_rows(corpus: &Corpus, cfg: &AnalysisConfig) -> Result<Vec<LabeledRow>> {
    let mut rows = Vec::new();
    for q in corpus.queries() {
        let labels = corpus.effective_labels(&q.id);
        if labels.values().all(|l| *l == Label::Difficult) {
            continue;
        }
        let (_, analysis) = analyze_query(corpus, &q.id, cfg)?;
        rows.extend(labeled_rows(&analysis, &labels));
    }
    Ok(rows)
}

pub fn train_model(corpus: &Corpus, cfg: &AnalysisConfig, lambda: f64) -> Result<RerankModel> {
    let rows = training_rows(corpus, cfg)?;
    if rows.is_empty() {
        return Err(PipelineError::Unlabeled("the store has no relevant/irrelevant labels".into()));
    }
    Ok(reranker::train(&rows, lambda, &cfg.params)?)
}

pub fn rerank_query(corpus: &Corpus, query_id: &str, model: &RerankModel, cfg: &AnalysisConfig) -> Result<RankedList> {
    let (_, analysis) = analyze_query(corpus, query_id, cfg)?;
    Ok(reranker::rerank(&analysis, model)?)
}

/// Metrics of `ranking` over the images with a relevant or irrelevant label.
pub fn evaluate(ranking: &RankedList, labels: &HashMap<String, Label>) -> Result<EvalReport> {
    let judged: Vec<&str> = ranking
        .ids()
        .into_iter()
        .filter(|id| matches!(labels.get(*id), Some(Label::Relevant | Label::Irrelevant)))
        .collect();
    if judged.is_empty() {
        return Err(PipelineError::Unlabeled("no relevant/irrelevant labels for this ranking".into()));
    }
    let relevant: HashSet<&str> = judged
        .iter()
        .copied()
        .filter(|id| labels.get(*id) == Some(&Label::Relevant))
        .collect();
    Ok(EvalReport::single(&judged, &relevant))
}

pub fn cross_validate_store(corpus: &Corpus, cfg: &AnalysisConfig, cv: &CvParams) -> Result<CvResult> {
    let rows = training_rows(corpus, cfg)?;
    Ok(reranker::cross_validate(&rows, cv)?)
}

/// Registers `query` and stores every acquired image. Returns the ids in rank order.
pub fn ingest(corpus: &mut Corpus, query: &Query, images: Vec<AcquiredImage>) -> Result<Vec<String>> {
    if images.is_empty() {
        return Err(PipelineError::NoImages(format!("nothing to ingest for query \"{}\"", query.text)));
    }
    corpus.put_query(query.clone())?;
    images
        .into_iter()
        .map(|a| Ok(corpus.put_record(a.record, &a.bytes)?))
        .collect()
}

/// One line of `features.jsonl`; reals carry 9 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub query_id: String,
    pub image_id: String,
    pub original_rank: u32,
    pub visual: VisualFeatures,
    pub text: TextBits,
    pub verdict: NaturalnessVerdict,
}

impl From<&ImageAnalysis> for FeatureRow {
    fn from(a: &ImageAnalysis) -> Self {
        let r = |x: f64| round_sig(x, 9);
        let v = &a.visual;
        Self {
            query_id: a.record.query_id.clone(),
            image_id: a.record.id.clone(),
            original_rank: a.record.original_rank,
            visual: VisualFeatures {
                entropy: r(v.entropy),
                energy: r(v.energy),
                skewness: r(v.skewness),
                text_skew_deg: v.text_skew_deg.map(r),
                distinct_color_ratio: r(v.distinct_color_ratio),
                edge_density: r(v.edge_density),
                saturation_mean: r(v.saturation_mean),
                ..v.clone()
            },
            text: a.text,
            verdict: a.verdict,
        }
    }
}

pub fn features_jsonl(images: &[ImageAnalysis]) -> String {
    images
        .iter()
        .map(|a| serde_json::to_string(&FeatureRow::from(a)).expect("row serializes") + "\n")
        .collect()
}

pub fn model_path(store: &Path) -> PathBuf {
    store.join("model.json")
}

pub fn ranking_path(store: &Path, query_id: &str) -> PathBuf {
    store.join("rankings").join(format!("{query_id}.jsonl"))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn save_model(store: &Path, model: &RerankModel) -> Result<PathBuf> {
    let path = model_path(store);
    write_atomic(&path, &model.to_json())?;
    Ok(path)
}

/// The stored model, or `None` when the store has none yet.
pub fn load_model(path: &Path) -> Result<Option<RerankModel>> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(RerankModel::from_json(&s)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

pub fn save_ranking(path: &Path, ranking: &RankedList) -> Result<()> {
    write_atomic(path, &ranking.to_jsonl())
}

pub fn load_ranking(path: &Path) -> Result<Option<RankedList>> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(RankedList::from_jsonl(&s)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}
