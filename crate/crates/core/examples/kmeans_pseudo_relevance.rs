//! Cluster a planted corpus and show how well cluster relevance separates
//! relevant from irrelevant images.
//!
//! cargo run --release --example kmeans_pseudo_relevance

use std::collections::HashSet;

use puresearch::corpus::{content_hash, Query};
use puresearch::pipeline::{analyze_described, describe, AnalysisConfig};
use puresearch::reranker::CLUSTER_REL;
use puresearch::synthetic::{planted_corpus, png_bytes, PlantedSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = PlantedSpec::default();
    let query = Query::new(&spec.query)?;
    let cfg = AnalysisConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut images = Vec::new();
    let mut truth = HashSet::new();
    for p in planted_corpus(&mut rng, &spec) {
        let bytes = png_bytes(&p.image);
        let mut record = p.record(&query.id);
        record.id = content_hash(&bytes);
        if p.relevant {
            truth.insert(record.id.clone());
        }
        images.push(describe(&record, &query, &bytes, &cfg)?);
    }
    let a = analyze_described(&query.id, &images, &cfg)?;
    println!("k = {}, cluster sizes {:?}", a.k, a.clusters.as_ref().map(|c| c.cluster_sizes()).unwrap_or_default());

    let mut rel = (0.0, 0usize);
    let mut irr = (0.0, 0usize);
    for (c, f) in a.candidates.iter().zip(&a.features) {
        let slot = if truth.contains(&c.image_id) { &mut rel } else { &mut irr };
        slot.0 += f.0[CLUSTER_REL];
        slot.1 += 1;
    }
    println!("mean cluster relevance: relevant {:.3}, irrelevant {:.3}", rel.0 / rel.1 as f64, irr.0 / irr.1 as f64);
    let e = &a.elimination;
    println!("intermediate images: {} of {}", e.eliminated.len(), a.candidates.len());
    Ok(())
}
