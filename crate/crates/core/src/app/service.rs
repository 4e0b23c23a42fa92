//! JSON HTTP API over a store, backing the labeling UI.
//!
//! Reads run concurrently. Label appends and rerank triggers are serialized
//! through one writer lock, so the label log has a single writer.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::PipelineConfig;
use crate::corpus::{Corpus, CorpusError, Label, LabelEntry};
use crate::pipeline::{self, PipelineError};
use crate::reranker::{RankedList, RerankModel};
use crate::visual::mime_type;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "code": self.code}))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NotFound(m) => Self::not_found(m),
            PipelineError::Corpus(CorpusError::NotFound(m)) => Self::not_found(m),
            PipelineError::Unlabeled(m) => Self::new(StatusCode::CONFLICT, "unlabeled", m),
            PipelineError::Corpus(CorpusError::Validation(m)) => Self::bad_request(m),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        PipelineError::from(e).into()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    cfg: PipelineConfig,
    corpus: RwLock<Corpus>,
    writer: tokio::sync::Mutex<()>,
    /// Symbolic verdict per image, filled lazily per query.
    symbolic: Mutex<HashMap<String, HashMap<String, bool>>>,
}

impl AppState {
    pub fn new(cfg: PipelineConfig, corpus: Corpus) -> Arc<Self> {
        Arc::new(Self {
            cfg,
            corpus: RwLock::new(corpus),
            writer: tokio::sync::Mutex::new(()),
            symbolic: Mutex::new(HashMap::new()),
        })
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Corpus> {
        self.corpus.read().unwrap_or_else(|e| e.into_inner())
    }

    fn symbolic_flags(&self, query_id: &str) -> ApiResult<HashMap<String, bool>> {
        if let Some(f) = self.symbolic.lock().unwrap_or_else(|e| e.into_inner()).get(query_id) {
            return Ok(f.clone());
        }
        let images = pipeline::describe_query(&self.read(), query_id, &self.cfg.analysis())?;
        let flags: HashMap<String, bool> = images
            .iter()
            .map(|a| (a.record.id.clone(), a.verdict.is_symbolic()))
            .collect();
        self.symbolic
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(query_id.to_string(), flags.clone());
        Ok(flags)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct QuerySummary {
    pub id: String,
    pub text: String,
    pub record_count: usize,
    pub labeled_count: usize,
}

async fn list_queries(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<QuerySummary>>> {
    let corpus = st.read();
    let out = corpus
        .queries()
        .iter()
        .map(|q| {
            Ok(QuerySummary {
                id: q.id.clone(),
                text: q.text.clone(),
                record_count: corpus.list_records(&q.id)?.len(),
                labeled_count: corpus.effective_labels(&q.id).len(),
            })
        })
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct ImagesParams {
    order: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ImageItem {
    pub image_id: String,
    pub original_rank: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_rank: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub symbolic: bool,
    pub width: u32,
    pub height: u32,
}

const MAX_LIMIT: usize = 1000;

async fn list_images(
    State(st): State<Arc<AppState>>,
    Path(qid): Path<String>,
    UrlQuery(p): UrlQuery<ImagesParams>,
) -> ApiResult<Json<Vec<ImageItem>>> {
    let reranked = match p.order.as_deref().unwrap_or("text") {
        "text" => false,
        "reranked" => true,
        other => return Err(ApiError::bad_request(format!("order must be text or reranked, not {other}"))),
    };
    let offset = p.offset.unwrap_or(0);
    let limit = p.limit.unwrap_or(100);
    if limit > MAX_LIMIT {
        return Err(ApiError::bad_request(format!("limit must be <= {MAX_LIMIT}")));
    }
    blocking(move || {
        let (records, labels) = {
            let corpus = st.read();
            if corpus.query(&qid).is_none() {
                return Err(ApiError::not_found(format!("query {qid}")));
            }
            (corpus.list_records(&qid)?, corpus.effective_labels(&qid))
        };
        let ranking = pipeline::load_ranking(&pipeline::ranking_path(&st.cfg.store, &qid))?;
        if reranked && ranking.is_none() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "no_ranking",
                format!("query {qid} has not been reranked yet"),
            ));
        }
        let symbolic = st.symbolic_flags(&qid)?;
        let by_id: HashMap<&str, _> = ranking
            .iter()
            .flat_map(|r| &r.entries)
            .map(|e| (e.image_id.as_str(), e))
            .collect();
        let record_by_id: HashMap<&str, _> = records.iter().map(|r| (r.id.as_str(), r)).collect();
        let ordered: Vec<&str> = match (&ranking, reranked) {
            (Some(r), true) => r.ids().into_iter().filter(|id| record_by_id.contains_key(id)).collect(),
            _ => records.iter().map(|r| r.id.as_str()).collect(),
        };
        let items = ordered
            .into_iter()
            .skip(offset)
            .take(limit)
            .map(|id| {
                let r = record_by_id[id];
                let e = by_id.get(id);
                ImageItem {
                    image_id: id.to_string(),
                    original_rank: r.original_rank,
                    new_rank: e.map(|e| e.new_rank),
                    score: e.map(|e| e.score),
                    label: labels.get(id).copied(),
                    symbolic: symbolic.get(id).copied().unwrap_or(false),
                    width: r.width,
                    height: r.height,
                }
            })
            .collect();
        Ok(Json(items))
    })
    .await
}

async fn image_content(State(st): State<Arc<AppState>>, Path(iid): Path<String>) -> ApiResult<Response> {
    let bytes = {
        let corpus = st.read();
        let record = corpus
            .find_image(&iid)
            .ok_or_else(|| ApiError::not_found(format!("image {iid}")))?;
        corpus.read_blob(record)?
    };
    let mime = mime_type(&bytes).unwrap_or("application/octet-stream");
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    image_id: String,
    query_id: String,
    label: String,
    #[serde(default)]
    annotator: Option<String>,
}

async fn post_label(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<StatusCode> {
    let body: LabelBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("label body: {e}")))?;
    let label: Label = body
        .label
        .parse()
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_label", format!("unknown label {:?}", body.label)))?;
    let _w = st.writer.lock().await;
    let mut corpus = st.corpus.write().unwrap_or_else(|e| e.into_inner());
    if corpus.query(&body.query_id).is_none() {
        return Err(ApiError::not_found(format!("query {}", body.query_id)));
    }
    if corpus.record(&body.query_id, &body.image_id).is_none() {
        return Err(ApiError::not_found(format!("image {} in query {}", body.image_id, body.query_id)));
    }
    let annotator = body.annotator.as_deref().unwrap_or("ui");
    corpus.append_label(LabelEntry::now(&body.query_id, &body.image_id, label, annotator))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn post_rerank(State(st): State<Arc<AppState>>, Path(qid): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let st2 = st.clone();
    let _w = st.writer.lock().await;
    blocking(move || {
        let st = st2;
        let start = Instant::now();
        let model = pipeline::load_model(&pipeline::model_path(&st.cfg.store))?.unwrap_or_else(RerankModel::text_only);
        let ranking = pipeline::rerank_query(&st.read(), &qid, &model, &st.cfg.analysis())?;
        pipeline::save_ranking(&pipeline::ranking_path(&st.cfg.store, &qid), &ranking)?;
        Ok(Json(json!({
            "model_version": model.version,
            "duration_ms": start.elapsed().as_millis() as u64,
        })))
    })
    .await
}

async fn get_eval(State(st): State<Arc<AppState>>, Path(qid): Path<String>) -> ApiResult<Response> {
    blocking(move || {
        let corpus = st.read();
        if corpus.query(&qid).is_none() {
            return Err(ApiError::not_found(format!("query {qid}")));
        }
        let ranking = match pipeline::load_ranking(&pipeline::ranking_path(&st.cfg.store, &qid))? {
            Some(r) => r,
            None => RankedList::baseline(
                &qid,
                corpus.list_records(&qid)?.into_iter().map(|r| (r.id, r.original_rank)),
            ),
        };
        let report = pipeline::evaluate(&ranking, &corpus.effective_labels(&qid))?;
        Ok(Json(report).into_response())
    })
    .await
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/queries", get(list_queries))
        .route("/api/queries/{qid}/images", get(list_images))
        .route("/api/queries/{qid}/rerank", post(post_rerank))
        .route("/api/queries/{qid}/eval", get(get_eval))
        .route("/api/images/{iid}/content", get(image_content))
        .route("/api/labels", post(post_label))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found));
    let app = match &state.cfg.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.fallback(api_not_found),
    };
    app.with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store and serves until the process is stopped.
pub async fn serve(cfg: PipelineConfig) -> Result<(), ServeError> {
    let corpus = Corpus::open(&cfg.store)?;
    let listener = tokio::net::TcpListener::bind(&cfg.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: cfg.bind.clone(),
            source,
        })?;
    log::info!("serving {} on http://{}", cfg.store.display(), listener.local_addr()?);
    axum::serve(listener, router(AppState::new(cfg, corpus))).await?;
    Ok(())
}
