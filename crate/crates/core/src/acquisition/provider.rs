//! Search providers: a directory of saved results, and a generic HTML scraper.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use scraper::{Html, Node};
use serde::{Deserialize, Serialize};
use url::Url;

use super::html::filename_of;
use super::AcquisitionError;
use crate::corpus::{content_hash, Query};

/// One entry of a provider's result list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub image_url: String,
    #[serde(default)]
    pub page_url: Option<String>,
    #[serde(default)]
    pub snippet: Option<String>,
    /// 1-based, contiguous within one response.
    pub rank: u32,
}

pub trait SearchProvider {
    /// Result list for `query`, at most `max_results` hits, ordered by rank.
    fn search(&self, query: &Query, max_results: usize) -> Result<Vec<SearchHit>, AcquisitionError>;
    fn fetch_page(&self, url: &str) -> Result<String, AcquisitionError>;
    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, AcquisitionError>;
}

fn check_ranks(hits: &[SearchHit]) -> Result<(), AcquisitionError> {
    for (i, h) in hits.iter().enumerate() {
        if h.rank as usize != i + 1 {
            return Err(AcquisitionError::Malformed(format!(
                "hit ranks must run 1..=n in order; position {} has rank {}",
                i + 1,
                h.rank
            )));
        }
    }
    Ok(())
}

/// Reads pre-saved results from a directory:
///
/// ```text
/// <dir>/hits.jsonl           one SearchHit per line
/// <dir>/pages/<sha256>.html  page bodies, keyed by the hash of the page URL
/// <dir>/images/<name>        image bytes, keyed by the URL's final path segment
/// ```
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    dir: PathBuf,
}

impl FixtureProvider {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, AcquisitionError> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(AcquisitionError::Unreachable(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self { dir })
    }

    pub fn page_path(dir: &Path, page_url: &str) -> PathBuf {
        dir.join("pages").join(format!("{}.html", content_hash(page_url.as_bytes())))
    }

    pub fn image_path(dir: &Path, image_url: &str) -> PathBuf {
        dir.join("images").join(filename_of(image_url))
    }
}

impl SearchProvider for FixtureProvider {
    fn search(&self, _query: &Query, max_results: usize) -> Result<Vec<SearchHit>, AcquisitionError> {
        let path = self.dir.join("hits.jsonl");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(AcquisitionError::Unreachable(format!("{}: {e}", path.display()))),
        };
        let mut hits = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let hit: SearchHit = serde_json::from_str(line)
                .map_err(|e| AcquisitionError::Malformed(format!("hits.jsonl:{}: {e}", i + 1)))?;
            hits.push(hit);
        }
        check_ranks(&hits)?;
        hits.truncate(max_results);
        Ok(hits)
    }

    fn fetch_page(&self, url: &str) -> Result<String, AcquisitionError> {
        let path = Self::page_path(&self.dir, url);
        fs::read_to_string(&path).map_err(|e| AcquisitionError::Fetch {
            url: url.to_string(),
            message: format!("{}: {e}", path.display()),
        })
    }

    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, AcquisitionError> {
        let path = Self::image_path(&self.dir, url);
        fs::read(&path).map_err(|e| AcquisitionError::Fetch {
            url: url.to_string(),
            message: format!("{}: {e}", path.display()),
        })
    }
}

/// Scrapes a results page rendered from a URL template (`{query}` is replaced
/// by the URL-encoded query text). Every `<img>` on the results page is a hit;
/// its page is the nearest enclosing link.
pub struct HtmlProvider {
    template: String,
    agent: ureq::Agent,
    user_agent: String,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
}

impl HtmlProvider {
    pub fn new(template: &str, requests_per_second: f64, timeout: Duration, user_agent: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            template: template.to_string(),
            agent,
            user_agent: user_agent.to_string(),
            min_interval: Duration::from_secs_f64(1.0 / requests_per_second),
            last_request: Mutex::new(None),
        }
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().expect("throttle lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn get(&self, url: &str) -> Result<ureq::http::Response<ureq::Body>, AcquisitionError> {
        self.throttle();
        self.agent
            .get(url)
            .header("User-Agent", &self.user_agent)
            .call()
            .map_err(|e| AcquisitionError::Fetch {
                url: url.to_string(),
                message: e.to_string(),
            })
    }

    fn search_url(&self, query: &Query) -> String {
        let encoded: String = url::form_urlencoded::byte_serialize(query.text.as_bytes()).collect();
        self.template.replace("{query}", &encoded)
    }
}

/// Hits on a results page: each `<img>` with its nearest enclosing `<a href>`.
pub fn hits_from_results_page(html: &str, base: Option<&Url>, max_results: usize) -> Vec<SearchHit> {
    let resolve = |s: &str| match base {
        Some(b) => b.join(s).map(|u| u.to_string()).unwrap_or_else(|_| s.to_string()),
        None => s.to_string(),
    };
    let doc = Html::parse_document(html);
    let mut hits: Vec<SearchHit> = Vec::new();
    for node in doc.tree.root().descendants() {
        let Node::Element(e) = node.value() else {
            continue;
        };
        if e.name() != "img" {
            continue;
        }
        let Some(src) = e.attr("src").map(str::trim).filter(|s| !s.is_empty()) else {
            continue;
        };
        let image_url = resolve(src);
        if hits.iter().any(|h| h.image_url == image_url) {
            continue;
        }
        let page_url = node.ancestors().find_map(|a| {
            a.value()
                .as_element()
                .filter(|el| el.name() == "a")
                .and_then(|el| el.attr("href"))
                .map(|h| resolve(h.trim()))
        });
        hits.push(SearchHit {
            image_url,
            page_url,
            snippet: e.attr("alt").map(str::to_string),
            rank: hits.len() as u32 + 1,
        });
        if hits.len() == max_results {
            break;
        }
    }
    hits
}

impl SearchProvider for HtmlProvider {
    fn search(&self, query: &Query, max_results: usize) -> Result<Vec<SearchHit>, AcquisitionError> {
        let url = self.search_url(query);
        let body = self
            .get(&url)
            .and_then(|mut r| {
                r.body_mut().read_to_string().map_err(|e| AcquisitionError::Fetch {
                    url: url.clone(),
                    message: e.to_string(),
                })
            })
            .map_err(|e| AcquisitionError::Unreachable(e.to_string()))?;
        let base = Url::parse(&url).ok();
        Ok(hits_from_results_page(&body, base.as_ref(), max_results))
    }

    fn fetch_page(&self, url: &str) -> Result<String, AcquisitionError> {
        self.get(url)?
            .body_mut()
            .read_to_string()
            .map_err(|e| AcquisitionError::Fetch {
                url: url.to_string(),
                message: e.to_string(),
            })
    }

    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, AcquisitionError> {
        self.get(url)?
            .body_mut()
            .read_to_vec()
            .map_err(|e| AcquisitionError::Fetch {
                url: url.to_string(),
                message: e.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_page_hits() {
        let base = Url::parse("http://search.test/q?x=1").unwrap();
        let html = r#"<a href="/page1"><img src="/i/1.png" alt="first"></a>
                      <div><img src="http://cdn.test/2.png"></div>
                      <a href="http://other.test/p"><span><img src="/i/3.png"></span></a>"#;
        let hits = hits_from_results_page(html, Some(&base), 10);
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].page_url.as_deref(), Some("http://search.test/page1"));
        assert_eq!(hits[0].snippet.as_deref(), Some("first"));
        assert_eq!(hits[1].page_url, None);
        assert_eq!(hits[2].page_url.as_deref(), Some("http://other.test/p"));
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(hits_from_results_page(html, Some(&base), 2).len(), 2);
    }

    #[test]
    fn missing_fixture_dir_is_unreachable() {
        assert!(matches!(
            FixtureProvider::new("/definitely/not/here"),
            Err(AcquisitionError::Unreachable(_))
        ));
    }

    #[test]
    fn non_contiguous_ranks_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("hits.jsonl"),
            "{\"image_url\":\"a.png\",\"rank\":1}\n{\"image_url\":\"b.png\",\"rank\":3}\n",
        )
        .unwrap();
        let p = FixtureProvider::new(dir.path()).unwrap();
        let q = Query::new("x").unwrap();
        assert!(matches!(p.search(&q, 10), Err(AcquisitionError::Malformed(_))));
    }
}
