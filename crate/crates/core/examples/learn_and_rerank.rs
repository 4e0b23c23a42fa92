//! Train weights from 60 labels on a planted corpus and compare precision@50
//! before and after reranking.
//!
//! cargo run --release --example learn_and_rerank -- [seeds]

use std::collections::{HashMap, HashSet};

use puresearch::corpus::{content_hash, Label, Query};
use puresearch::evaluation::precision_at_k;
use puresearch::pipeline::{analyze_described, describe, labeled_rows, AnalysisConfig};
use puresearch::reranker::{self, META_FEATURE_NAMES};
use puresearch::synthetic::{planted_corpus, png_bytes, PlantedSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let spec = PlantedSpec::default();
    let query = Query::new(&spec.query)?;
    let cfg = AnalysisConfig::default();

    let mut lifts = Vec::new();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planted = planted_corpus(&mut rng, &spec);
        let mut images = Vec::new();
        let mut truth = HashSet::new();
        for p in &planted {
            let bytes = png_bytes(&p.image);
            let mut record = p.record(&query.id);
            record.id = content_hash(&bytes);
            if p.relevant {
                truth.insert(record.id.clone());
            }
            images.push(describe(&record, &query, &bytes, &cfg)?);
        }
        let analysis = analyze_described(&query.id, &images, &cfg)?;

        let mut ids: Vec<&str> = analysis.candidates.iter().map(|c| c.image_id.as_str()).collect();
        ids.shuffle(&mut rng);
        let labels: HashMap<String, Label> = ids[..60]
            .iter()
            .map(|id| {
                let l = if truth.contains(*id) { Label::Relevant } else { Label::Irrelevant };
                (id.to_string(), l)
            })
            .collect();
        let model = reranker::train(&labeled_rows(&analysis, &labels), 1.0, &cfg.params)?;

        let baseline = analysis.baseline();
        let reranked = reranker::rerank(&analysis, &model)?;
        let before = precision_at_k(&baseline.ids(), &truth.iter().map(String::as_str).collect(), 50)?;
        let after = precision_at_k(&reranked.ids(), &truth.iter().map(String::as_str).collect(), 50)?;
        println!("seed {seed}: P@50 {before:.2} -> {after:.2}");
        if seed == 0 {
            for (name, w) in META_FEATURE_NAMES.iter().zip(&model.weights) {
                println!("    {name:<22} {w:+.4}");
            }
        }
        lifts.push(after - before);
    }
    println!("mean lift {:.3}", lifts.iter().sum::<f64>() / lifts.len() as f64);
    Ok(())
}
