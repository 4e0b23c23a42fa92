//! Candidate acquisition: search providers, the three download approaches,
//! page metadata harvesting and the minimum-size filter.

mod html;
mod provider;

pub use html::{
    embedded_images, extract_metadata, extract_metadata_with, filename_of, MetadataNotFound, PageMetadata,
    DEFAULT_WINDOW,
};
pub use provider::{hits_from_results_page, FixtureProvider, HtmlProvider, SearchHit, SearchProvider};

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::corpus::{content_hash, Approach, ImageRecord, Query};

/// Images smaller than this on either side are discarded.
pub const MIN_SIDE: u32 = 120;
pub const DEFAULT_MAX_RESULTS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum AcquisitionError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("fetch of {url} failed: {message}")]
    Fetch { url: String, message: String },
    #[error("malformed provider data: {0}")]
    Malformed(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
}

/// How provider hits turn into candidate images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchApproach {
    /// Hits are web pages; every image embedded in them is a candidate.
    WebSearch,
    /// Each hit image is a seed; the other images on its origin page follow it.
    ImageSearchSeed,
    /// Only the hit images themselves.
    DirectImageSearch,
}

impl From<SearchApproach> for Approach {
    fn from(a: SearchApproach) -> Self {
        match a {
            SearchApproach::WebSearch => Approach::WebSearch,
            SearchApproach::ImageSearchSeed => Approach::ImageSearchSeed,
            SearchApproach::DirectImageSearch => Approach::DirectImageSearch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Fixture,
    GenericHtml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Fixture directory, or URL template containing `{query}`.
    pub location: String,
    /// Requests per second for HTTP providers; fixtures are not throttled.
    pub rate_limit: f64,
    pub timeout_secs: f64,
    pub max_results: usize,
    pub user_agent: String,
    /// Minimum width and height of a kept image.
    pub min_side: u32,
    /// Words of page text kept on each side of the image tag.
    pub window: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Fixture,
            location: String::new(),
            rate_limit: 1.0,
            timeout_secs: 30.0,
            max_results: DEFAULT_MAX_RESULTS,
            user_agent: concat!("puresearch/", env!("CARGO_PKG_VERSION")).to_string(),
            min_side: MIN_SIDE,
            window: DEFAULT_WINDOW,
        }
    }
}

impl ProviderConfig {
    pub fn fixture(dir: impl AsRef<Path>) -> Self {
        Self {
            kind: ProviderKind::Fixture,
            location: dir.as_ref().display().to_string(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AcquisitionError> {
        if self.max_results < 1 {
            return Err(AcquisitionError::InvalidConfig("max_results must be >= 1".into()));
        }
        if !(self.rate_limit > 0.0) {
            return Err(AcquisitionError::InvalidConfig("rate_limit must be > 0".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(AcquisitionError::InvalidConfig("timeout_secs must be > 0".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn SearchProvider>, AcquisitionError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Fixture => Box::new(FixtureProvider::new(&self.location)?),
            ProviderKind::GenericHtml => {
                if !self.location.contains("{query}") {
                    return Err(AcquisitionError::InvalidConfig(
                        "URL template must contain {query}".into(),
                    ));
                }
                Box::new(HtmlProvider::new(
                    &self.location,
                    self.rate_limit,
                    Duration::from_secs_f64(self.timeout_secs),
                    &self.user_agent,
                ))
            }
        })
    }
}

/// Keep iff both sides are at least [`MIN_SIDE`].
pub fn size_filter(width: u32, height: u32) -> bool {
    size_filter_with(width, height, MIN_SIDE)
}

pub fn size_filter_with(width: u32, height: u32, min_side: u32) -> bool {
    width >= min_side && height >= min_side
}

/// A fetched candidate: its record (with `id` set to the content hash) and bytes.
#[derive(Debug, Clone)]
pub struct AcquiredImage {
    pub record: ImageRecord,
    pub bytes: Vec<u8>,
}

struct Candidate {
    image_url: String,
    page_url: Option<String>,
    snippet: Option<String>,
}

/// Fetches candidates for `query` from the provider described by `config`.
pub fn acquire(query: &Query, approach: SearchApproach, config: &ProviderConfig) -> Result<Vec<AcquiredImage>, AcquisitionError> {
    let provider = config.build()?;
    acquire_with(provider.as_ref(), query, approach, config)
}

/// Runs one acquisition approach against a provider.
///
/// Records come back in discovery order with `original_rank` 1..=n. Failed
/// fetches and undecodable or undersized images are logged and skipped.
/// Byte-identical images are kept once, at their first (lowest) rank.
pub fn acquire_with(
    provider: &dyn SearchProvider,
    query: &Query,
    approach: SearchApproach,
    config: &ProviderConfig,
) -> Result<Vec<AcquiredImage>, AcquisitionError> {
    config.validate()?;
    let hits = provider.search(query, config.max_results)?;
    let mut pages: HashMap<String, Option<String>> = HashMap::new();
    let mut page = |url: &str| -> Option<String> {
        pages
            .entry(url.to_string())
            .or_insert_with(|| match provider.fetch_page(url) {
                Ok(body) => Some(body),
                Err(e) => {
                    log::warn!("skipping page: {e}");
                    None
                }
            })
            .clone()
    };
    let embedded = |html: &str, page_url: &str| {
        let base = Url::parse(page_url).ok();
        embedded_images(html, base.as_ref())
    };

    let mut candidates: Vec<Candidate> = Vec::new();
    match approach {
        SearchApproach::DirectImageSearch => {
            candidates.extend(hits.iter().map(|h| Candidate {
                image_url: h.image_url.clone(),
                page_url: h.page_url.clone(),
                snippet: h.snippet.clone(),
            }));
        }
        SearchApproach::ImageSearchSeed => {
            for h in &hits {
                candidates.push(Candidate {
                    image_url: h.image_url.clone(),
                    page_url: h.page_url.clone(),
                    snippet: h.snippet.clone(),
                });
                let Some(page_url) = &h.page_url else { continue };
                let Some(body) = page(page_url) else { continue };
                for url in embedded(&body, page_url) {
                    if url != h.image_url {
                        candidates.push(Candidate {
                            image_url: url,
                            page_url: Some(page_url.clone()),
                            snippet: None,
                        });
                    }
                }
            }
        }
        SearchApproach::WebSearch => {
            let mut visited = HashSet::new();
            for h in &hits {
                let Some(page_url) = &h.page_url else {
                    log::warn!("web-search hit {} has no page; skipped", h.rank);
                    continue;
                };
                if !visited.insert(page_url.clone()) {
                    continue;
                }
                let Some(body) = page(page_url) else { continue };
                for url in embedded(&body, page_url) {
                    candidates.push(Candidate {
                        image_url: url,
                        page_url: Some(page_url.clone()),
                        snippet: None,
                    });
                }
            }
        }
    }

    let mut out: Vec<AcquiredImage> = Vec::new();
    let mut seen = HashSet::new();
    for c in candidates {
        if out.len() >= config.max_results {
            break;
        }
        let bytes = match provider.fetch_image(&c.image_url) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("skipping image: {e}");
                continue;
            }
        };
        let (width, height) = match crate::corpus::decode_dimensions(&bytes) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("skipping {}: {e}", c.image_url);
                continue;
            }
        };
        if !size_filter_with(width, height, config.min_side) {
            log::debug!("{} is {width}x{height}; below minimum size", c.image_url);
            continue;
        }
        let id = content_hash(&bytes);
        if !seen.insert(id.clone()) {
            continue;
        }

        let mut record = ImageRecord::new(&query.id, &c.image_url, out.len() as u32 + 1, width, height);
        record.id = id;
        record.approach = approach.into();
        record.page_url = c.page_url.clone();
        let meta = c.page_url.as_deref().and_then(|p| {
            let body = page(p)?;
            let base = Url::parse(p).ok();
            extract_metadata_with(&body, &c.image_url, base.as_ref(), config.window)
                .map_err(|e| log::debug!("{e}"))
                .ok()
        });
        match meta {
            Some(m) => {
                record.alt_text = m.alt_text;
                record.surrounding_text = m.surrounding_text;
                record.page_title = m.page_title;
            }
            None => {
                if let Some(s) = c.snippet {
                    record.surrounding_text = s;
                }
            }
        }
        out.push(AcquiredImage { record, bytes });
    }
    Ok(out)
}

/// Image files of a local directory (sorted by file name) as candidates.
/// Files that do not decode or fail the size filter are skipped.
pub fn ingest_directory(dir: &Path, query: &Query, min_side: u32) -> Result<Vec<AcquiredImage>, AcquisitionError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| AcquisitionError::Unreachable(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut out: Vec<AcquiredImage> = Vec::new();
    let mut seen = HashSet::new();
    for path in files {
        let Ok(bytes) = std::fs::read(&path) else { continue };
        let Ok((w, h)) = crate::corpus::decode_dimensions(&bytes) else {
            log::debug!("{} is not a supported image", path.display());
            continue;
        };
        if !size_filter_with(w, h, min_side) {
            continue;
        }
        let id = content_hash(&bytes);
        if !seen.insert(id.clone()) {
            continue;
        }
        let url = Url::from_file_path(std::fs::canonicalize(&path).unwrap_or(path.clone()))
            .map(|u| u.to_string())
            .unwrap_or_else(|_| path.display().to_string());
        let mut record = ImageRecord::new(&query.id, &url, out.len() as u32 + 1, w, h);
        record.id = id;
        record.approach = Approach::LocalIngest;
        out.push(AcquiredImage { record, bytes });
    }
    Ok(out)
}
