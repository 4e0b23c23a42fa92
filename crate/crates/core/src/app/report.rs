//! Static side-by-side gallery of the text ranking and the reranked list.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use crate::corpus::{Label, Query};
use crate::reranker::RankedList;

#[derive(Debug, thiserror::Error)]
#[error("invalid report input: {0}")]
pub struct ReportError(pub String);

/// What the gallery shows for one image besides its ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCard {
    /// Image location relative to the report file.
    pub href: String,
    pub symbolic: bool,
    pub label: Option<Label>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "\
body{font-family:sans-serif;margin:1.5em;background:#fafafa;color:#222}
.columns{display:grid;grid-template-columns:1fr 1fr;gap:2em}
.grid{display:flex;flex-wrap:wrap;gap:8px;align-content:flex-start}
figure{margin:0;width:150px;background:#fff;border:1px solid #ddd;padding:4px}
figure img{width:150px;height:150px;object-fit:cover;display:block}
figcaption{font-size:12px;margin-top:4px}
.badge{display:inline-block;border-radius:3px;padding:0 4px;margin-left:4px;color:#fff;background:#777}
.badge.symbolic{background:#b36b00}
.badge.relevant{background:#2e7d32}
.badge.irrelevant{background:#c62828}
.badge.difficult{background:#5e35b1}
.empty{color:#777;font-style:italic}
";

fn figure(out: &mut String, image_id: &str, original: u32, new: u32, shown: u32, card: &ImageCard) {
    let _ = write!(
        out,
        "<figure data-image-id=\"{id}\" data-original-rank=\"{original}\" data-new-rank=\"{new}\">\
         <img src=\"{href}\" alt=\"\" loading=\"lazy\"><figcaption>#{shown} <span class=\"ranks\">text {original} / reranked {new}</span>",
        id = escape(image_id),
        href = escape(&card.href),
    );
    if card.symbolic {
        out.push_str("<span class=\"badge symbolic\">symbolic</span>");
    }
    if let Some(l) = card.label {
        let _ = write!(out, "<span class=\"badge {0}\">{0}</span>", l.as_str());
    }
    out.push_str("</figcaption></figure>\n");
}

/// Renders the gallery. Both lists must rank the same image ids and every id
/// needs a card.
pub fn html_report(
    query: &Query,
    baseline: &RankedList,
    reranked: &RankedList,
    cards: &HashMap<String, ImageCard>,
) -> Result<String, ReportError> {
    let a: HashSet<&str> = baseline.ids().into_iter().collect();
    let b: HashSet<&str> = reranked.ids().into_iter().collect();
    if a != b || a.len() != baseline.len() || b.len() != reranked.len() {
        return Err(ReportError("baseline and reranked lists hold different images".into()));
    }
    if let Some(id) = a.iter().find(|id| !cards.contains_key(**id)) {
        return Err(ReportError(format!("no card for image {id}")));
    }
    let new_rank: HashMap<&str, u32> = reranked.entries.iter().map(|e| (e.image_id.as_str(), e.new_rank)).collect();
    let text_rank: HashMap<&str, u32> = baseline.entries.iter().map(|e| (e.image_id.as_str(), e.new_rank)).collect();

    let title = escape(&query.text);
    let mut out = format!(
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>{title}: text rank vs reranked</title>\
         <style>\n{STYLE}</style></head><body>\n<h1>{title}</h1>\n"
    );
    if baseline.is_empty() {
        out.push_str("<p class=\"empty\">No images for this query.</p>\n</body></html>\n");
        return Ok(out);
    }
    let _ = writeln!(out, "<p>{} images</p>\n<div class=\"columns\">", baseline.len());
    for (name, class, list) in [("Text rank", "baseline", baseline), ("Reranked", "reranked", reranked)] {
        let _ = writeln!(out, "<section class=\"{class}\"><h2>{name}</h2><div class=\"grid\">");
        for (i, e) in list.entries.iter().enumerate() {
            let id = e.image_id.as_str();
            figure(&mut out, id, text_rank[id], new_rank[id], i as u32 + 1, &cards[id]);
        }
        out.push_str("</div></section>\n");
    }
    out.push_str("</div>\n</body></html>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use scraper::{Html, Selector};

    fn cards(ids: &[&str]) -> HashMap<String, ImageCard> {
        ids.iter()
            .map(|id| {
                (
                    id.to_string(),
                    ImageCard {
                        href: format!("../blobs/{id}"),
                        symbolic: *id == "b",
                        label: (*id == "c").then_some(Label::Difficult),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn empty_state() {
        let q = Query::new("penguin").unwrap();
        let html = html_report(&q, &RankedList::default(), &RankedList::default(), &HashMap::new()).unwrap();
        assert!(html.contains("class=\"empty\""));
        assert_eq!(Html::parse_document(&html).select(&Selector::parse("figure").unwrap()).count(), 0);
    }

    #[test]
    fn three_images() {
        let q = Query::new("penguin <b>").unwrap();
        let base = RankedList::baseline("q", [("a".to_string(), 1), ("b".to_string(), 2), ("c".to_string(), 3)]);
        let rer = RankedList::from_scores("q", vec![("a".into(), 1, 0.1), ("b".into(), 2, 0.0), ("c".into(), 3, 0.9)]);
        let html = html_report(&q, &base, &rer, &cards(&["a", "b", "c"])).unwrap();
        let doc = Html::parse_document(&html);
        let sel = |s: &str| Selector::parse(s).unwrap();
        assert_eq!(doc.select(&sel("figure")).count(), 6);
        let order = |section: &str| -> Vec<(String, String, String)> {
            doc.select(&sel(&format!("section.{section} figure")))
                .map(|f| {
                    let v = f.value();
                    (
                        v.attr("data-image-id").unwrap().to_string(),
                        v.attr("data-original-rank").unwrap().to_string(),
                        v.attr("data-new-rank").unwrap().to_string(),
                    )
                })
                .collect()
        };
        let s = |a: &str, b: &str, c: &str| (a.to_string(), b.to_string(), c.to_string());
        assert_eq!(order("baseline"), vec![s("a", "1", "2"), s("b", "2", "3"), s("c", "3", "1")]);
        assert_eq!(order("reranked"), vec![s("c", "3", "1"), s("a", "1", "2"), s("b", "2", "3")]);
        let caption = doc.select(&sel("section.reranked figcaption")).next().unwrap().text().collect::<String>();
        assert!(caption.starts_with("#1 "), "{caption}");
        assert!(html.contains(">difficult<"));
        assert!(html.contains(">symbolic<"));
        assert!(html.contains("penguin &lt;b&gt;"));
        assert!(!html.contains("http://") && !html.contains("https://"));
    }

    #[test]
    fn mismatched_lists() {
        let q = Query::new("x").unwrap();
        let base = RankedList::baseline("q", [("a".to_string(), 1)]);
        let rer = RankedList::baseline("q", [("b".to_string(), 1)]);
        assert!(html_report(&q, &base, &rer, &cards(&["a", "b"])).is_err());
    }
}
