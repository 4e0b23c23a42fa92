mod common;

use std::path::Path;
use std::process::{Command, Output};

use puresearch::corpus::{Corpus, Label, LabelEntry};
use puresearch::reranker::{RankedList, RerankModel};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_puresearch"));
    c.env_remove(puresearch::app::STORE_ENV);
    c
}

fn run(store: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--store").arg(store).output().unwrap()
}

fn ok(store: &Path, args: &[&str]) -> String {
    let out = run(store, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn ingest(f: &common::Fixture) {
    let fx = f.path();
    ok(&f.store(), &["ingest", "--query", "penguin", "--fixture", fx.to_str().unwrap()]);
}

fn label_truth(f: &common::Fixture, every: usize) {
    let mut corpus = Corpus::open(f.store()).unwrap();
    let records = corpus.list_records("penguin").unwrap();
    for (r, p) in records.iter().zip(&f.planted).step_by(every) {
        let l = if p.relevant { Label::Relevant } else { Label::Irrelevant };
        corpus.append_label(LabelEntry::now("penguin", &r.id, l, "test")).unwrap();
    }
}

#[test]
fn zero_weight_rerank_keeps_ingest_order() {
    let f = common::fixture(21, 25);
    ingest(&f);
    let model = f.dir.path().join("zero.json");
    std::fs::write(&model, RerankModel::zero().to_json()).unwrap();
    let out = f.dir.path().join("zero.jsonl");
    ok(&f.store(), &["rerank", "--query", "penguin", "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    let ranking = RankedList::from_jsonl(&common::read(&out)).unwrap();
    let records = Corpus::open(f.store()).unwrap().list_records("penguin").unwrap();
    let ingested: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ranking.ids(), ingested);
    for (i, e) in ranking.entries.iter().enumerate() {
        assert_eq!((e.new_rank, e.original_rank, e.score), (i as u32 + 1, i as u32 + 1, 0.0));
    }
}

#[test]
fn full_workflow() {
    let f = common::fixture(22, 60);
    let store = f.store();
    ingest(&f);

    let features = ok(&store, &["features", "--query", "penguin"]);
    assert_eq!(features.lines().count(), 60);
    let first: serde_json::Value = serde_json::from_str(features.lines().next().unwrap()).unwrap();
    assert_eq!(first["original_rank"], 1);

    let filter = ok(&store, &["filter", "--query", "penguin"]);
    assert_eq!(filter.lines().count(), 60);
    let symbolic = ok(&store, &["filter", "--query", "penguin", "--symbolic-only"]);
    assert!(symbolic.lines().all(|l| l.contains("\"symbolic\"")));

    let out = run(&store, &["train"]);
    assert_eq!(out.status.code(), Some(2), "training without labels is a data error");

    label_truth(&f, 1);
    let id = Corpus::open(&store).unwrap().list_records("penguin").unwrap()[0].id.clone();
    ok(&store, &["label", "--query", "penguin", "--image", &id, "--label", "difficult"]);
    assert_eq!(run(&store, &["label", "--query", "penguin", "--image", "nope", "--label", "relevant"]).status.code(), Some(2));

    ok(&store, &["train", "--lambda", "0.5"]);
    let model = RerankModel::from_json(&common::read(&store.join("model.json"))).unwrap();
    assert_eq!(model.lambda, 0.5);
    assert_eq!(model.training_rows + model.eliminated_rows, 59);

    ok(&store, &["rerank", "--query", "penguin"]);
    let ranking = RankedList::from_jsonl(&common::read(&store.join("rankings/penguin.jsonl"))).unwrap();
    assert_eq!(ranking.len(), 60);

    let eval = ok(&store, &["eval", "--query", "penguin"]);
    let report: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(report["counts"]["labeled_images"], 59);

    ok(&store, &["report", "--query", "penguin"]);
    let html = common::read(&store.join("reports/penguin.html"));
    assert_eq!(html.matches("<figure").count(), 120);
    assert!(html.contains("src=\"../blobs/"));
}

#[test]
fn cross_validation_is_reproducible() {
    let f = common::fixture(23, 80);
    let store = f.store();
    ingest(&f);
    label_truth(&f, 1);
    let a = f.dir.path().join("a.json");
    let b = f.dir.path().join("b.json");
    ok(&store, &["cv", "--out", a.to_str().unwrap()]);
    ok(&store, &["cv", "--seed", "42", "--out", b.to_str().unwrap()]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&common::read(&a)).unwrap();
    assert_eq!(v["fold_metrics"].as_array().unwrap().len(), 50);
    assert_eq!(v["models_trained"], 50);

    let c = f.dir.path().join("c.json");
    ok(&store, &["cv", "--seed", "7", "--out", c.to_str().unwrap()]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("store");
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();

    let out = run(&store, &["ingest", "--query", "penguin", "--dir", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no images"));

    assert_eq!(run(&store, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&store, &["rerank"]).status.code(), Some(1));
    assert_eq!(run(&store, &["cv", "--folds", "1"]).status.code(), Some(1));
    assert_eq!(run(&store, &["rerank", "--query", "penguin"]).status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn store_precedence() {
    let f = common::fixture(24, 5);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    let from_file = tmp.path().join("file_store");
    let from_env = tmp.path().join("env_store");
    std::fs::write(&cfg, serde_json::json!({"store": from_file}).to_string()).unwrap();
    let fx = f.path();
    let args = ["ingest", "--query", "penguin", "--fixture", fx.to_str().unwrap(), "--config", cfg.to_str().unwrap()];

    assert!(bin().args(args).status().unwrap().success());
    assert!(from_file.join("manifest.jsonl").exists());

    assert!(bin().args(args).env(puresearch::app::STORE_ENV, &from_env).status().unwrap().success());
    assert!(from_env.join("manifest.jsonl").exists());

    let flag = tmp.path().join("flag_store");
    assert!(bin()
        .args(args)
        .env(puresearch::app::STORE_ENV, &from_env)
        .arg("--store")
        .arg(&flag)
        .status()
        .unwrap()
        .success());
    assert!(flag.join("manifest.jsonl").exists());
}
