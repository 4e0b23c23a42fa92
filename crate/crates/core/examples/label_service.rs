//! Drive the HTTP API in-process: list queries, page through images, post a
//! label, rerank and evaluate.
//!
//! cargo run --example label_service

use axum::body::Body;
use axum::http::{Request, StatusCode};
use puresearch::acquisition::{acquire, ProviderConfig, SearchApproach};
use puresearch::app::{router, AppState, PipelineConfig};
use puresearch::corpus::{Corpus, Query};
use puresearch::pipeline::ingest;
use puresearch::synthetic::{planted_corpus, write_fixture, PlantedSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let spec = PlantedSpec {
        images: 20,
        ..PlantedSpec::default()
    };
    let planted = planted_corpus(&mut ChaCha8Rng::seed_from_u64(2), &spec);
    write_fixture(&work.path().join("fixture"), &planted)?;
    let query = Query::new(&spec.query)?;
    let images = acquire(&query, SearchApproach::DirectImageSearch, &ProviderConfig::fixture(work.path().join("fixture")))?;
    let mut corpus = Corpus::open_or_create(work.path().join("store"))?;
    let ids = ingest(&mut corpus, &query, images)?;

    let cfg = PipelineConfig {
        store: work.path().join("store"),
        ..PipelineConfig::default()
    };
    let app = router(AppState::new(cfg, corpus));

    println!("{:?}", call(&app, "GET", "/api/queries", "").await);
    let (s, page) = call(&app, "GET", &format!("/api/queries/{}/images?limit=3", query.id), "").await;
    println!("{s} {page}");
    let label = format!(r#"{{"query_id":"{}","image_id":"{}","label":"relevant"}}"#, query.id, ids[0]);
    println!("label -> {}", call(&app, "POST", "/api/labels", &label).await.0);
    println!("{:?}", call(&app, "POST", &format!("/api/queries/{}/rerank", query.id), "").await);
    println!("{:?}", call(&app, "GET", &format!("/api/queries/{}/eval", query.id), "").await);
    Ok(())
}
