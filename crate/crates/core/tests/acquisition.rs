use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use puresearch::acquisition::{
    acquire, acquire_with, AcquisitionError, ProviderConfig, ProviderKind, SearchApproach, SearchHit, SearchProvider,
};
use puresearch::corpus::{content_hash, Approach, Query};
use puresearch::synthetic::png_bytes;

/// A distinct `w`x`h` PNG for every `n`.
fn png(n: u32, w: u32, h: u32) -> Vec<u8> {
    png_bytes(&RgbImage::from_fn(w, h, |x, y| {
        if x == 0 && y == 0 {
            Rgb([(n & 0xff) as u8, ((n >> 8) & 0xff) as u8, ((n >> 16) & 0xff) as u8])
        } else {
            Rgb([200, 200, 200])
        }
    }))
}

#[derive(Default)]
struct Memory {
    hits: Vec<SearchHit>,
    pages: HashMap<String, String>,
    images: HashMap<String, Vec<u8>>,
    page_fetches: AtomicUsize,
}

impl Memory {
    fn hit(&mut self, image_url: &str, page_url: Option<&str>) {
        let rank = self.hits.len() as u32 + 1;
        self.hits.push(SearchHit {
            image_url: image_url.into(),
            page_url: page_url.map(Into::into),
            snippet: Some(format!("snippet {rank}")),
            rank,
        });
    }
}

impl SearchProvider for Memory {
    fn search(&self, _: &Query, max_results: usize) -> Result<Vec<SearchHit>, AcquisitionError> {
        Ok(self.hits.iter().take(max_results).cloned().collect())
    }

    fn fetch_page(&self, url: &str) -> Result<String, AcquisitionError> {
        self.page_fetches.fetch_add(1, Ordering::SeqCst);
        self.pages.get(url).cloned().ok_or_else(|| AcquisitionError::Fetch {
            url: url.into(),
            message: "404".into(),
        })
    }

    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, AcquisitionError> {
        self.images.get(url).cloned().ok_or_else(|| AcquisitionError::Fetch {
            url: url.into(),
            message: "404".into(),
        })
    }
}

fn penguin() -> Query {
    Query::new("penguin").unwrap()
}

#[test]
fn direct_search_caps_at_max_results() {
    let mut m = Memory::default();
    for i in 0..1200 {
        let url = format!("http://img.test/{i}.png");
        m.images.insert(url.clone(), png(i, 120, 120));
        m.hit(&url, None);
    }
    let images = acquire_with(&m, &penguin(), SearchApproach::DirectImageSearch, &ProviderConfig::default()).unwrap();
    assert_eq!(images.len(), 1000);
    for (i, a) in images.iter().enumerate() {
        assert_eq!(a.record.original_rank, i as u32 + 1);
        assert_eq!(a.record.image_url, format!("http://img.test/{i}.png"));
        assert_eq!(a.record.id, content_hash(&a.bytes));
        assert_eq!(a.record.surrounding_text, format!("snippet {}", i + 1));
    }
}

#[test]
fn skips_small_broken_and_duplicate_images() {
    let mut m = Memory::default();
    m.images.insert("http://i/a.png".into(), png(1, 120, 120));
    m.images.insert("http://i/small.png".into(), png(2, 119, 300));
    m.images.insert("http://i/garbage.png".into(), b"not an image".to_vec());
    m.images.insert("http://i/copy.png".into(), png(1, 120, 120));
    m.images.insert("http://i/b.png".into(), png(3, 300, 120));
    for u in ["a", "small", "garbage", "missing", "copy", "b"] {
        m.hit(&format!("http://i/{u}.png"), None);
    }
    let images = acquire_with(&m, &penguin(), SearchApproach::DirectImageSearch, &ProviderConfig::default()).unwrap();
    let urls: Vec<&str> = images.iter().map(|a| a.record.image_url.as_str()).collect();
    assert_eq!(urls, ["http://i/a.png", "http://i/b.png"]);
    assert_eq!(images[1].record.original_rank, 2);
}

fn seeded_site() -> Memory {
    let mut m = Memory::default();
    m.pages.insert(
        "http://site.test/p1.html".into(),
        r#"<html><head><title>Penguin colony</title></head><body>
           <p>emperor penguin huddle</p><img src="hit.png" alt="a penguin">
           <img src="/more/1.png"><img src="more/2.png"><img src="http://cdn.test/3.png"></body></html>"#
            .into(),
    );
    for (n, u) in ["http://site.test/hit.png", "http://site.test/more/1.png", "http://site.test/more/2.png", "http://cdn.test/3.png"]
        .iter()
        .enumerate()
    {
        m.images.insert(u.to_string(), png(n as u32, 150, 150));
    }
    m.hit("http://site.test/hit.png", Some("http://site.test/p1.html"));
    m
}

#[test]
fn image_search_seed_adds_page_images() {
    let m = seeded_site();
    let images = acquire_with(&m, &penguin(), SearchApproach::ImageSearchSeed, &ProviderConfig::default()).unwrap();
    let urls: Vec<&str> = images.iter().map(|a| a.record.image_url.as_str()).collect();
    assert_eq!(
        urls,
        ["http://site.test/hit.png", "http://site.test/more/1.png", "http://site.test/more/2.png", "http://cdn.test/3.png"]
    );
    let first = &images[0].record;
    assert_eq!(first.alt_text, "a penguin");
    assert_eq!(first.page_title, "Penguin colony");
    assert!(first.surrounding_text.contains("emperor penguin huddle"));
    assert!(images.iter().all(|a| a.record.approach == Approach::ImageSearchSeed));
    assert_eq!(m.page_fetches.load(Ordering::SeqCst), 1, "pages are fetched once");
}

#[test]
fn web_search_collects_embedded_images() {
    let mut m = seeded_site();
    m.hits[0].image_url = String::new();
    m.hit("", None);
    let images = acquire_with(&m, &penguin(), SearchApproach::WebSearch, &ProviderConfig::default()).unwrap();
    assert_eq!(images.len(), 4);
    assert!(images.iter().all(|a| a.record.approach == Approach::WebSearch));
    assert_eq!(images[3].record.page_url.as_deref(), Some("http://site.test/p1.html"));
}

/// Serves `routes` over HTTP/1.1 on a loopback port until the test process exits.
fn serve(routes: HashMap<String, (&'static str, Vec<u8>)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let routes = Arc::new(routes);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let routes = routes.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                        break;
                    }
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let (status, ctype, body) = match routes.get(&path) {
                    Some((c, b)) => ("200 OK", *c, b.clone()),
                    None => ("404 Not Found", "text/plain", b"missing".to_vec()),
                };
                let head = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&body);
            });
        }
    });
    format!("http://{addr}")
}

#[test]
fn generic_html_provider_over_http() {
    let mut routes = HashMap::new();
    routes.insert(
        "/search?q=King+Penguin".to_string(),
        (
            "text/html",
            br#"<html><body>
                <a href="/page1.html"><img src="/img/1.png"></a>
                <a href="/page2.html"><img src="/img/2.png"></a>
                <img src="/img/missing.png">
                </body></html>"#
                .to_vec(),
        ),
    );
    routes.insert(
        "/page1.html".to_string(),
        (
            "text/html",
            br#"<html><head><title>King penguin facts</title></head><body><p>a king penguin</p><img src="/img/1.png" alt="king penguin"></body></html>"#.to_vec(),
        ),
    );
    routes.insert("/img/1.png".to_string(), ("image/png", png(1, 130, 140)));
    routes.insert("/img/2.png".to_string(), ("image/png", png(2, 160, 120)));
    let base = serve(routes);

    let cfg = ProviderConfig {
        kind: ProviderKind::GenericHtml,
        location: format!("{base}/search?q={{query}}"),
        rate_limit: 100.0,
        timeout_secs: 5.0,
        ..ProviderConfig::default()
    };
    let q = Query::new("King Penguin").unwrap();
    let images = acquire(&q, SearchApproach::DirectImageSearch, &cfg).unwrap();
    assert_eq!(images.len(), 2);
    let r = &images[0].record;
    assert_eq!(r.image_url, format!("{base}/img/1.png"));
    assert_eq!(r.page_url.as_deref(), Some(format!("{base}/page1.html").as_str()));
    assert_eq!((r.width, r.height), (130, 140));
    assert_eq!(r.alt_text, "king penguin");
    assert_eq!(r.page_title, "King penguin facts");
    assert_eq!(images[1].record.original_rank, 2);
    // page2 is missing: the image is kept without page metadata
    assert_eq!(images[1].record.alt_text, "");
}

#[test]
fn unreachable_provider() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let cfg = ProviderConfig {
        kind: ProviderKind::GenericHtml,
        location: format!("http://{addr}/s?q={{query}}"),
        timeout_secs: 2.0,
        ..ProviderConfig::default()
    };
    assert!(acquire(&penguin(), SearchApproach::DirectImageSearch, &cfg).is_err());
    let bad = ProviderConfig {
        kind: ProviderKind::GenericHtml,
        location: "http://x.test/no-placeholder".into(),
        ..ProviderConfig::default()
    };
    assert!(acquire(&penguin(), SearchApproach::DirectImageSearch, &bad).is_err());
}
