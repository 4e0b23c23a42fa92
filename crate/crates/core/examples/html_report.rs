//! Build a store from a planted corpus, rerank it and write the HTML gallery.
//!
//! cargo run --release --example html_report -- [out.html]

use puresearch::app::cli;
use puresearch::synthetic::{planted_corpus, write_fixture, PlantedSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let fixture = work.path().join("fixture");
    let store = work.path().join("store");
    let spec = PlantedSpec {
        images: 40,
        ..PlantedSpec::default()
    };
    let planted = planted_corpus(&mut ChaCha8Rng::seed_from_u64(9), &spec);
    write_fixture(&fixture, &planted)?;

    let out = std::env::args().nth(1).unwrap_or_else(|| "report.html".into());
    let s = store.to_str().unwrap();
    for args in [
        vec!["ingest", "--store", s, "--query", "penguin", "--fixture", fixture.to_str().unwrap()],
        vec!["rerank", "--store", s, "--query", "penguin"],
        vec!["report", "--store", s, "--query", "penguin", "--out", &out],
    ] {
        let code = cli::run(std::iter::once("puresearch").chain(args));
        if code != 0 {
            return Err(format!("puresearch exited with {code}").into());
        }
    }
    println!("blob links in {out} point into {}, which is removed on exit", store.display());
    Ok(())
}
