#![allow(dead_code)]

use std::path::{Path, PathBuf};

use puresearch::acquisition::{acquire, ProviderConfig, SearchApproach};
use puresearch::corpus::{Corpus, Query};
use puresearch::pipeline::ingest;
use puresearch::synthetic::{planted_corpus, write_fixture, PlantedImage, PlantedSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub planted: Vec<PlantedImage>,
    pub query: Query,
}

impl Fixture {
    pub fn path(&self) -> PathBuf {
        self.dir.path().join("fixture")
    }

    pub fn store(&self) -> PathBuf {
        self.dir.path().join("store")
    }
}

/// Saved search results for a planted corpus of `images` candidates.
pub fn fixture(seed: u64, images: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let spec = PlantedSpec {
        images,
        head: images.min(50),
        ..PlantedSpec::default()
    };
    let planted = planted_corpus(&mut ChaCha8Rng::seed_from_u64(seed), &spec);
    write_fixture(&dir.path().join("fixture"), &planted).unwrap();
    Fixture {
        dir,
        planted,
        query: Query::new(&spec.query).unwrap(),
    }
}

/// Acquires the fixture into a fresh store; returns the store and the ids in rank order.
pub fn ingested(f: &Fixture) -> (Corpus, Vec<String>) {
    let images = acquire(&f.query, SearchApproach::DirectImageSearch, &ProviderConfig::fixture(f.path())).unwrap();
    let mut corpus = Corpus::open_or_create(f.store()).unwrap();
    let ids = ingest(&mut corpus, &f.query, images).unwrap();
    (corpus, ids)
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
