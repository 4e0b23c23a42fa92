//! Prototype meta-rerankers, cluster pseudo-relevance, the linear model and
//! its offline training.

mod cv;
mod ridge;

pub use cv::{cross_validate, CvParams, CvResult, LabeledRow};
pub use ridge::{learn_weights, learn_weights_centered, ridge_gradient, ridge_objective};

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kmeans::{self, default_k, ClusterModel, KMeansError, KMeansParams, PointSet, Standardization};
use crate::textual::{TextBits, TEXT_BIT_COUNT, TEXT_BIT_NAMES};
use crate::visual::NaturalnessVerdict;

pub const META_DIM: usize = 10;

pub const META_FEATURE_NAMES: [&str; META_DIM] = [
    TEXT_BIT_NAMES[0],
    TEXT_BIT_NAMES[1],
    TEXT_BIT_NAMES[2],
    TEXT_BIT_NAMES[3],
    TEXT_BIT_NAMES[4],
    TEXT_BIT_NAMES[5],
    "proto_max",
    "proto_mean",
    "cluster_rel",
    "natural",
];

pub const PROTO_MAX: usize = 6;
pub const PROTO_MEAN: usize = 7;
pub const CLUSTER_REL: usize = 8;
pub const NATURAL: usize = 9;

pub const DEFAULT_PROTOTYPES: usize = 25;
pub const DEFAULT_PSEUDO_POSITIVES: usize = 50;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_MAJORITY: f64 = 0.8;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("no prototypes survived the symbolic filter")]
    NoPrototypes,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    KMeans(#[from] KMeansError),
}

pub type Result<T, E = RerankError> = std::result::Result<T, E>;

/// Per-query tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankParams {
    /// Prototype count N.
    pub prototypes: usize,
    /// Pseudo-positive count T.
    pub pseudo_positives: usize,
    /// Cluster count; `None` picks [`default_k`].
    pub k: Option<usize>,
    pub seed: u64,
    /// Repeated clusterings used to find intermediate images.
    pub runs: usize,
    /// Fraction of runs that must agree for an image to be kept.
    pub majority: f64,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self {
            prototypes: DEFAULT_PROTOTYPES,
            pseudo_positives: DEFAULT_PSEUDO_POSITIVES,
            k: None,
            seed: 42,
            runs: DEFAULT_RUNS,
            majority: DEFAULT_MAJORITY,
        }
    }
}

impl RerankParams {
    pub fn validate(&self) -> Result<()> {
        if self.prototypes < 1 || self.pseudo_positives < 1 {
            return Err(RerankError::InvalidInput("prototype and pseudo-positive counts must be >= 1".into()));
        }
        if self.k == Some(0) {
            return Err(RerankError::InvalidInput("k must be >= 1".into()));
        }
        if self.runs < 1 || !(self.majority > 0.5 && self.majority <= 1.0) {
            return Err(RerankError::InvalidInput("need runs >= 1 and 0.5 < majority <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub image_id: String,
    /// Standardized visual vector.
    pub vector: Vec<f64>,
}

/// One image as the reranker sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateImage {
    pub image_id: String,
    pub original_rank: u32,
    pub text: TextBits,
    /// Raw [`crate::visual::VisualFeatures::ranking_vector`].
    pub visual: Vec<f64>,
    pub verdict: NaturalnessVerdict,
}

/// Standardized visual vectors of the first `n` candidates (by rank) that are
/// not symbolic.
pub fn build_prototypes(candidates: &[CandidateImage], standardized: &[Vec<f64>], n: usize) -> Result<Vec<Prototype>> {
    if n < 1 {
        return Err(RerankError::InvalidInput("prototype count must be >= 1".into()));
    }
    let protos: Vec<Prototype> = by_rank(candidates)
        .into_iter()
        .filter(|&i| !candidates[i].verdict.is_symbolic())
        .take(n)
        .map(|i| Prototype {
            image_id: candidates[i].image_id.clone(),
            vector: standardized[i].clone(),
        })
        .collect();
    if protos.is_empty() {
        return Err(RerankError::NoPrototypes);
    }
    Ok(protos)
}

fn by_rank(candidates: &[CandidateImage]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by_key(|&i| candidates[i].original_rank);
    idx
}

/// Median pairwise Euclidean distance between prototypes, or 1.0 when that
/// is undefined or zero.
pub fn default_sigma(prototypes: &[Prototype]) -> f64 {
    let mut d = Vec::new();
    for (i, a) in prototypes.iter().enumerate() {
        for b in &prototypes[i + 1..] {
            d.push(kmeans::squared_distance(&a.vector, &b.vector).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if median > 0.0 && median.is_finite() {
        median
    } else {
        1.0
    }
}

/// Gaussian kernel `exp(-‖x - p‖² / 2σ²)`.
pub fn prototype_similarity(x: &[f64], p: &Prototype, sigma: f64) -> Result<f64> {
    if x.len() != p.vector.len() {
        return Err(RerankError::InvalidInput(format!(
            "vector of dimension {} against prototype of dimension {}",
            x.len(),
            p.vector.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(RerankError::InvalidInput(format!("sigma {sigma} must be > 0")));
    }
    Ok((-kmeans::squared_distance(x, &p.vector) / (2.0 * sigma * sigma)).exp())
}

/// Result of clustering all candidates of a query.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRelevance {
    /// Share of pseudo-positives in each point's cluster, in input order.
    pub cluster_rel: Vec<f64>,
    pub model: ClusterModel,
}

/// Fits k-means on `points` and scores each point by the fraction of its
/// cluster that is flagged in `in_top`.
pub fn pseudo_relevance_scores(points: &PointSet, in_top: &[bool], k: usize, seed: u64) -> Result<PseudoRelevance> {
    if in_top.len() != points.len() {
        return Err(RerankError::InvalidInput("one top-T flag per point required".into()));
    }
    if !in_top.iter().any(|&t| t) {
        return Err(RerankError::InvalidInput("no pseudo-positive images".into()));
    }
    let model = kmeans::fit(points, &KMeansParams::new(k, seed))?;
    let mut top = vec![0usize; model.k];
    let sizes = model.cluster_sizes();
    for (&c, &t) in model.assignment.iter().zip(in_top) {
        if t {
            top[c] += 1;
        }
    }
    let cluster_rel = model
        .assignment
        .iter()
        .map(|&c| top[c] as f64 / sizes[c] as f64)
        .collect();
    Ok(PseudoRelevance { cluster_rel, model })
}

/// Fixed-order meta feature vector: six text bits, prototype max and mean
/// similarity, cluster pseudo-relevance, naturalness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetaFeatureVector(pub [f64; META_DIM]);

impl MetaFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn meta_features(
    text: &TextBits,
    standardized: &[f64],
    prototypes: &[Prototype],
    sigma: f64,
    cluster_rel: f64,
    verdict: &NaturalnessVerdict,
) -> Result<MetaFeatureVector> {
    let mut v = [0.0; META_DIM];
    v[..TEXT_BIT_COUNT].copy_from_slice(&text.indicators());
    if !prototypes.is_empty() {
        let sims = prototypes
            .iter()
            .map(|p| prototype_similarity(standardized, p, sigma))
            .collect::<Result<Vec<f64>>>()?;
        v[PROTO_MAX] = sims.iter().copied().fold(0.0, f64::max);
        v[PROTO_MEAN] = sims.iter().sum::<f64>() / sims.len() as f64;
    }
    v[CLUSTER_REL] = cluster_rel;
    v[NATURAL] = verdict.naturalness();
    Ok(MetaFeatureVector(v))
}

/// The linear reranking model; query-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankModel {
    pub format_version: u32,
    /// Content hash of everything below; changes whenever the model does.
    pub version: String,
    pub features: Vec<String>,
    #[serde(with = "crate::numfmt::sig12_vec")]
    pub weights: Vec<f64>,
    #[serde(with = "crate::numfmt::sig12")]
    pub lambda: f64,
    pub params: RerankParams,
    /// Visual vectors are standardized per query over its candidates.
    pub standardization: String,
    pub training_rows: usize,
    pub eliminated_rows: usize,
}

impl RerankModel {
    pub fn with_weights(weights: [f64; META_DIM]) -> Self {
        let mut m = Self {
            format_version: MODEL_FORMAT_VERSION,
            version: String::new(),
            features: META_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights: weights.to_vec(),
            lambda: 0.0,
            params: RerankParams::default(),
            standardization: "per_query_sample_std".into(),
            training_rows: 0,
            eliminated_rows: 0,
        };
        m.seal();
        m
    }

    /// All weights zero: reranking reproduces the text order.
    pub fn zero() -> Self {
        Self::with_weights([0.0; META_DIM])
    }

    /// Unit weight on every text bit, used when no trained model is available.
    pub fn text_only() -> Self {
        let mut w = [0.0; META_DIM];
        w[..TEXT_BIT_COUNT].fill(1.0);
        Self::with_weights(w)
    }

    /// Recomputes `version` from the rest of the model as serialized.
    pub fn seal(&mut self) {
        self.version = String::new();
        let bytes = serde_json::to_vec(self).expect("model serializes");
        self.version = hex::encode(&Sha256::digest(&bytes)[..6]);
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != META_DIM {
            return Err(RerankError::InvalidInput(format!(
                "model has {} weights, expected {META_DIM}",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !(self.lambda >= 0.0) {
            return Err(RerankError::InvalidInput("model weights must be finite and lambda >= 0".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| RerankError::InvalidInput(format!("model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

pub fn combine(f: &MetaFeatureVector, model: &RerankModel) -> Result<f64> {
    if model.weights.len() != META_DIM {
        return Err(RerankError::InvalidInput(format!(
            "model has {} weights, expected {META_DIM}",
            model.weights.len()
        )));
    }
    Ok(ridge::dot(&model.weights, &f.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub query_id: String,
    pub image_id: String,
    #[serde(with = "crate::numfmt::sig9")]
    pub score: f64,
    pub new_rank: u32,
    pub original_rank: u32,
}

/// Entries ordered by descending score, ties by ascending original rank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Orders `(image_id, original_rank, score)` triples and assigns new ranks.
    pub fn from_scores(query_id: &str, items: Vec<(String, u32, f64)>) -> Self {
        let mut items = items;
        items.sort_by(|a, b| match b.2.total_cmp(&a.2) {
            Ordering::Equal => a.1.cmp(&b.1),
            o => o,
        });
        Self {
            entries: items
                .into_iter()
                .enumerate()
                .map(|(i, (image_id, original_rank, score))| RankedEntry {
                    query_id: query_id.to_string(),
                    image_id,
                    score,
                    new_rank: i as u32 + 1,
                    original_rank,
                })
                .collect(),
        }
    }

    /// The text-rank baseline: scores are 0, order is original rank.
    pub fn baseline(query_id: &str, items: impl IntoIterator<Item = (String, u32)>) -> Self {
        Self::from_scores(query_id, items.into_iter().map(|(id, r)| (id, r, 0.0)).collect())
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.image_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        let entries = s
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| RerankError::InvalidInput(format!("ranking line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<RankedEntry>>>()?;
        Ok(Self { entries })
    }
}

/// Outcome of repeated pseudo-relevance clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    /// Indices classified the same way in at least `majority` of the runs.
    pub kept: Vec<usize>,
    /// Majority class of each kept index (true = positive).
    pub kept_positive: Vec<bool>,
    pub eliminated: Vec<usize>,
    /// Positive-run count for every point.
    pub positive_runs: Vec<usize>,
}

fn run_seed(seed: u64, run: usize) -> u64 {
    seed ^ (run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Reruns the pseudo-relevance classification `runs` times with derived seeds.
/// An image is positive in a run when its cluster_rel is at least 0.5.
pub fn eliminate_intermediate(
    points: &PointSet,
    in_top: &[bool],
    k: usize,
    seed: u64,
    runs: usize,
    majority: f64,
) -> Result<Elimination> {
    if runs < 1 || !(majority > 0.5 && majority <= 1.0) {
        return Err(RerankError::InvalidInput("need runs >= 1 and 0.5 < majority <= 1".into()));
    }
    let mut positive_runs = vec![0usize; points.len()];
    for r in 0..runs {
        let pr = pseudo_relevance_scores(points, in_top, k, run_seed(seed, r))?;
        for (count, rel) in positive_runs.iter_mut().zip(&pr.cluster_rel) {
            if *rel >= 0.5 {
                *count += 1;
            }
        }
    }
    Ok(classify_runs(positive_runs, runs, majority))
}

fn classify_runs(positive_runs: Vec<usize>, runs: usize, majority: f64) -> Elimination {
    let need = majority * runs as f64 - 1e-9;
    let mut e = Elimination {
        kept: Vec::new(),
        kept_positive: Vec::new(),
        eliminated: Vec::new(),
        positive_runs,
    };
    for (i, &p) in e.positive_runs.iter().enumerate() {
        if p as f64 >= need {
            e.kept.push(i);
            e.kept_positive.push(true);
        } else if (runs - p) as f64 >= need {
            e.kept.push(i);
            e.kept_positive.push(false);
        } else {
            e.eliminated.push(i);
        }
    }
    e
}

/// Everything computed for one query before scoring.
#[derive(Debug, Clone)]
pub struct QueryAnalysis {
    pub query_id: String,
    /// Sorted by original rank.
    pub candidates: Vec<CandidateImage>,
    pub standardization: Standardization,
    pub standardized: Vec<Vec<f64>>,
    pub prototypes: Vec<Prototype>,
    /// False when every candidate was symbolic and prototypes fell back to the unfiltered top.
    pub prototypes_filtered: bool,
    pub sigma: f64,
    pub k: usize,
    pub clusters: Option<ClusterModel>,
    pub features: Vec<MetaFeatureVector>,
    pub elimination: Elimination,
}

/// Standardizes the candidates, builds prototypes, clusters, and assembles
/// every candidate's meta feature vector.
pub fn analyze(query_id: &str, candidates: Vec<CandidateImage>, params: &RerankParams) -> Result<QueryAnalysis> {
    params.validate()?;
    let mut candidates = candidates;
    candidates.sort_by_key(|c| c.original_rank);
    let n = candidates.len();
    let mut seen = HashSet::new();
    if let Some(c) = candidates.iter().find(|c| !seen.insert(c.image_id.as_str())) {
        return Err(RerankError::InvalidInput(format!("duplicate image {}", c.image_id)));
    }
    if n == 0 {
        return Ok(QueryAnalysis {
            query_id: query_id.to_string(),
            candidates,
            standardization: Standardization::identity(0),
            standardized: Vec::new(),
            prototypes: Vec::new(),
            prototypes_filtered: true,
            sigma: 1.0,
            k: 0,
            clusters: None,
            features: Vec::new(),
            elimination: classify_runs(Vec::new(), params.runs, params.majority),
        });
    }

    let raw = PointSet::new(candidates.iter().map(|c| c.visual.clone()).collect())?;
    let (points, standardization) = if n >= 2 {
        kmeans::standardize(&raw)?
    } else {
        (raw.clone(), Standardization::identity(raw.dim()))
    };
    let standardized = points.points().to_vec();

    let (prototypes, prototypes_filtered) = match build_prototypes(&candidates, &standardized, params.prototypes) {
        Ok(p) => (p, true),
        Err(RerankError::NoPrototypes) => {
            log::info!("{query_id}: every candidate is symbolic; prototypes use the unfiltered top");
            let p = (0..n.min(params.prototypes))
                .map(|i| Prototype {
                    image_id: candidates[i].image_id.clone(),
                    vector: standardized[i].clone(),
                })
                .collect();
            (p, false)
        }
        Err(e) => return Err(e),
    };
    let sigma = default_sigma(&prototypes);

    let natural: Vec<usize> = (0..n).filter(|&i| !candidates[i].verdict.is_symbolic()).collect();
    let top: Vec<usize> = if natural.is_empty() {
        (0..n).take(params.pseudo_positives).collect()
    } else {
        natural.into_iter().take(params.pseudo_positives).collect()
    };
    let mut in_top = vec![false; n];
    for i in top {
        in_top[i] = true;
    }

    let k = params.k.unwrap_or_else(|| default_k(n)).min(n);
    let pr = pseudo_relevance_scores(&points, &in_top, k, params.seed)?;
    let elimination = eliminate_intermediate(&points, &in_top, k, params.seed, params.runs, params.majority)?;

    let features = candidates
        .iter()
        .zip(&standardized)
        .zip(&pr.cluster_rel)
        .map(|((c, x), &rel)| meta_features(&c.text, x, &prototypes, sigma, rel, &c.verdict))
        .collect::<Result<Vec<_>>>()?;

    Ok(QueryAnalysis {
        query_id: query_id.to_string(),
        candidates,
        standardization,
        standardized,
        prototypes,
        prototypes_filtered,
        sigma,
        k,
        clusters: Some(pr.model),
        features,
        elimination,
    })
}

impl QueryAnalysis {
    pub fn is_intermediate(&self, index: usize) -> bool {
        self.elimination.eliminated.contains(&index)
    }

    pub fn baseline(&self) -> RankedList {
        RankedList::baseline(
            &self.query_id,
            self.candidates.iter().map(|c| (c.image_id.clone(), c.original_rank)),
        )
    }
}

/// Scores every candidate with `model` and sorts.
pub fn rerank(analysis: &QueryAnalysis, model: &RerankModel) -> Result<RankedList> {
    model.validate()?;
    let items = analysis
        .candidates
        .iter()
        .zip(&analysis.features)
        .map(|(c, f)| Ok((c.image_id.clone(), c.original_rank, combine(f, model)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedList::from_scores(&analysis.query_id, items))
}

/// Fits a model on labeled rows. Rows flagged intermediate are left out
/// unless that would leave a single class.
pub fn train(rows: &[LabeledRow], lambda: f64, params: &RerankParams) -> Result<RerankModel> {
    let (weights, used) = cv::fit_rows(rows.iter(), lambda)?;
    let mut model = RerankModel::with_weights(weights);
    model.lambda = lambda;
    model.params = *params;
    model.training_rows = used;
    model.eliminated_rows = rows.len() - used;
    model.seal();
    Ok(model)
}
