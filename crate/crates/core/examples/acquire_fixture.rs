//! Write a planted corpus as saved search results, then acquire it back the
//! way a live crawl would: page text, size filter and deduplication.
//!
//! cargo run --example acquire_fixture -- [dir]

use puresearch::acquisition::{acquire, ProviderConfig, SearchApproach};
use puresearch::corpus::Query;
use puresearch::synthetic::{planted_corpus, write_fixture, PlantedSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());
    let spec = PlantedSpec {
        images: 30,
        ..PlantedSpec::default()
    };
    let planted = planted_corpus(&mut ChaCha8Rng::seed_from_u64(5), &spec);
    write_fixture(&dir, &planted)?;

    let query = Query::new(&spec.query)?;
    let images = acquire(&query, SearchApproach::DirectImageSearch, &ProviderConfig::fixture(&dir))?;
    println!("acquired {} of {} hits from {}", images.len(), planted.len(), dir.display());
    for a in images.iter().take(5) {
        let r = &a.record;
        println!(
            "#{:<3} {}x{} alt={:?} title={:?}",
            r.original_rank, r.width, r.height, r.alt_text, r.page_title
        );
    }
    Ok(())
}
