//! Repeated stratified cross-validation over a labeled planted corpus.
//!
//! cargo run --release --example cross_validation -- [folds] [repeats]

use std::collections::HashMap;

use puresearch::corpus::{content_hash, Label, Query};
use puresearch::pipeline::{analyze_described, describe, labeled_rows, AnalysisConfig};
use puresearch::reranker::{cross_validate, CvParams};
use puresearch::synthetic::{planted_corpus, png_bytes, PlantedSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let folds: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let repeats: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let spec = PlantedSpec {
        images: 120,
        ..PlantedSpec::default()
    };
    let query = Query::new(&spec.query)?;
    let cfg = AnalysisConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut images = Vec::new();
    let mut labels = HashMap::new();
    for p in planted_corpus(&mut rng, &spec) {
        let bytes = png_bytes(&p.image);
        let mut record = p.record(&query.id);
        record.id = content_hash(&bytes);
        labels.insert(record.id.clone(), if p.relevant { Label::Relevant } else { Label::Irrelevant });
        images.push(describe(&record, &query, &bytes, &cfg)?);
    }
    let analysis = analyze_described(&query.id, &images, &cfg)?;
    let rows = labeled_rows(&analysis, &labels);
    let params = CvParams {
        folds,
        repeats,
        ..CvParams::default()
    };
    let result = cross_validate(&rows, &params)?;
    print!("{}", result.report.to_table());
    println!("{} models trained on {} rows", result.models_trained, rows.len());
    Ok(())
}
