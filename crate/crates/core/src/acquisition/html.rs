//! Metadata harvesting from the HTML page that embeds an image.

use scraper::{Html, Node, Selector};
use url::Url;

/// Words of visible text kept on each side of the image tag by default.
pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageMetadata {
    pub alt_text: String,
    pub surrounding_text: String,
    pub page_title: String,
    pub filename: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("image {0} is not referenced by the page")]
pub struct MetadataNotFound(pub String);

/// Final path segment of a URL, without query string or fragment.
pub fn filename_of(image_url: &str) -> String {
    let path = image_url.split(['?', '#']).next().unwrap_or("");
    path.rsplit('/').next().unwrap_or("").to_string()
}

const INVISIBLE: [&str; 6] = ["script", "style", "noscript", "head", "title", "template"];

fn image_source(el: &scraper::node::Element) -> Option<&str> {
    el.attr("src").or_else(|| el.attr("data-src")).map(str::trim).filter(|s| !s.is_empty())
}

fn src_matches(src: &str, image_url: &str, base: Option<&Url>) -> bool {
    if src == image_url {
        return true;
    }
    if let Some(base) = base {
        if let (Ok(a), Ok(b)) = (base.join(src), Url::parse(image_url)) {
            if a == b {
                return true;
            }
        }
    }
    let rel = src.trim_start_matches("./");
    !rel.is_empty() && image_url.ends_with(&format!("/{rel}"))
}

/// Extracts the alt text, the `window` words of visible text on either side
/// of the first `<img>` pointing at `image_url`, the page title and the
/// image filename. `base` resolves relative `src` attributes.
pub fn extract_metadata_with(
    html: &str,
    image_url: &str,
    base: Option<&Url>,
    window: usize,
) -> Result<PageMetadata, MetadataNotFound> {
    let doc = Html::parse_document(html);
    let title_sel = Selector::parse("title").expect("static selector");
    let page_title = doc
        .select(&title_sel)
        .next()
        .map(|t| t.text().collect::<Vec<_>>().join(" "))
        .map(|t| t.split_whitespace().collect::<Vec<_>>().join(" "))
        .unwrap_or_default();

    let mut words: Vec<&str> = Vec::new();
    let mut hit: Option<(usize, String)> = None;
    for node in doc.tree.root().descendants() {
        match node.value() {
            Node::Text(t) => {
                let hidden = node.ancestors().any(|a| {
                    a.value()
                        .as_element()
                        .is_some_and(|e| INVISIBLE.contains(&e.name()))
                });
                if !hidden {
                    words.extend(t.split_whitespace());
                }
            }
            Node::Element(e)
                if hit.is_none() && e.name() == "img" && image_source(e).is_some_and(|s| src_matches(s, image_url, base)) =>
            {
                hit = Some((words.len(), e.attr("alt").unwrap_or("").trim().to_string()));
            }
            _ => {}
        }
        if let Some((at, _)) = &hit {
            if words.len() >= at + window {
                break;
            }
        }
    }

    let (at, alt_text) = hit.ok_or_else(|| MetadataNotFound(image_url.to_string()))?;
    let start = at.saturating_sub(window);
    let end = (at + window).min(words.len());
    Ok(PageMetadata {
        alt_text,
        surrounding_text: words[start..end].join(" "),
        page_title,
        filename: filename_of(image_url),
    })
}

/// [`extract_metadata_with`] using the default window and the image URL itself
/// as base for relative references.
pub fn extract_metadata(html: &str, image_url: &str) -> Result<PageMetadata, MetadataNotFound> {
    let base = Url::parse(image_url).ok();
    extract_metadata_with(html, image_url, base.as_ref(), DEFAULT_WINDOW)
}

/// Absolute URLs of every `<img>` on the page, in document order, without duplicates.
pub fn embedded_images(html: &str, base: Option<&Url>) -> Vec<String> {
    let doc = Html::parse_document(html);
    let mut out: Vec<String> = Vec::new();
    for node in doc.tree.root().descendants() {
        let Node::Element(e) = node.value() else {
            continue;
        };
        if e.name() != "img" {
            continue;
        }
        let Some(src) = image_source(e) else {
            continue;
        };
        let resolved = match base {
            Some(b) => b.join(src).map(|u| u.to_string()).unwrap_or_else(|_| src.to_string()),
            None => src.to_string(),
        };
        if !out.contains(&resolved) {
            out.push(resolved);
        }
    }
    out
}
