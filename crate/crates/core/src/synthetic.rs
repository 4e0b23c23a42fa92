//! Generators for synthetic images and planted-relevance corpora.
//!
//! These back the runnable examples and the test suites: every generator is a
//! pure function of its RNG, so a seed pins the output exactly.

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use std::path::Path;

use crate::acquisition::{FixtureProvider, SearchHit};
use crate::corpus::{Approach, ImageRecord};

/// Encodes pixels as PNG bytes.
pub fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory PNG encoding cannot fail");
    out.into_inner()
}

/// A white page with dark horizontal text-like lines, rotated counter-clockwise
/// (as displayed) by `theta_deg` about the image center.
pub fn striped_page(width: u32, height: u32, theta_deg: f64) -> RgbImage {
    const PERIOD: f64 = 14.0;
    const THICKNESS: f64 = 5.0;
    const WORD: f64 = 37.0;
    const GAP: f64 = 7.0;
    let (s, c) = theta_deg.to_radians().sin_cos();
    let cx = (f64::from(width) - 1.0) / 2.0;
    let cy = (f64::from(height) - 1.0) / 2.0;
    RgbImage::from_fn(width, height, |x, y| {
        let (dx, dy) = (f64::from(x) - cx, f64::from(y) - cy);
        // coordinates in the unrotated page
        let u = dx * c - dy * s;
        let v = dx * s + dy * c;
        let on_line = (v + 1000.0 * PERIOD).rem_euclid(PERIOD) < THICKNESS;
        let in_gap = (u + 1000.0 * WORD).rem_euclid(WORD) < GAP;
        if on_line && !in_gap {
            Rgb([20, 20, 20])
        } else {
            Rgb([245, 245, 245])
        }
    })
}

fn random_color(rng: &mut dyn RngCore) -> Rgb<u8> {
    Rgb([rng.random(), rng.random(), rng.random()])
}

/// A cartoon-like drawing: a flat background with a few flat rectangles and discs.
pub fn flat_drawing(rng: &mut dyn RngCore, width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, random_color(rng));
    let shapes = rng.random_range(2..=4);
    for _ in 0..shapes {
        let color = random_color(rng);
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let rw = rng.random_range(width / 8..=width / 2).max(1);
        let rh = rng.random_range(height / 8..=height / 2).max(1);
        let disc = rng.random_bool(0.5);
        for y in y0..(y0 + rh).min(height) {
            for x in x0..(x0 + rw).min(width) {
                let inside = if disc {
                    let nx = (f64::from(x - x0) + 0.5) / f64::from(rw) * 2.0 - 1.0;
                    let ny = (f64::from(y - y0) + 0.5) / f64::from(rh) * 2.0 - 1.0;
                    nx * nx + ny * ny <= 1.0
                } else {
                    true
                };
                if inside {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    img
}

/// Parameters of a textured, photo-like image: a smooth two-color gradient
/// with per-channel Gaussian noise.
#[derive(Debug, Clone, Copy)]
pub struct PhotoStyle {
    pub top: [f64; 3],
    pub bottom: [f64; 3],
    pub noise_sigma: f64,
}

pub fn textured_photo(rng: &mut dyn RngCore, width: u32, height: u32, style: &PhotoStyle) -> RgbImage {
    let noise = Normal::new(0.0, style.noise_sigma.max(1e-9)).expect("finite sigma");
    let h = f64::from(height.max(2) - 1);
    RgbImage::from_fn(width, height, |_, y| {
        let t = f64::from(y) / h;
        let mut px = [0u8; 3];
        for (ch, out) in px.iter_mut().enumerate() {
            let base = style.top[ch] * (1.0 - t) + style.bottom[ch] * t;
            *out = (base + noise.sample(&mut *rng)).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(px)
    })
}

/// A noise-textured photo-like image with random colors.
pub fn noise_photo(rng: &mut dyn RngCore, width: u32, height: u32) -> RgbImage {
    let mut color = || {
        let mut c = [0.0; 3];
        for v in &mut c {
            *v = rng.random_range(30.0..225.0);
        }
        c
    };
    let style = PhotoStyle {
        top: color(),
        bottom: color(),
        noise_sigma: 35.0,
    };
    textured_photo(rng, width, height, &style)
}

/// One generated candidate of a planted corpus.
#[derive(Debug, Clone)]
pub struct PlantedImage {
    pub image: RgbImage,
    pub relevant: bool,
    /// 1-based position in the simulated text-search result list.
    pub rank: u32,
    pub image_url: String,
    pub page_url: String,
    pub alt_text: String,
    pub surrounding_text: String,
    pub page_title: String,
}

/// Knobs of [`planted_corpus`].
#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub query: String,
    pub images: usize,
    pub relevant_fraction: f64,
    /// Size of the head of the text ranking whose relevant share is pinned.
    pub head: usize,
    /// Relevant share inside the head.
    pub head_relevant_fraction: f64,
    /// Probability that a relevant image carries query-bearing metadata.
    pub meta_given_relevant: f64,
    /// Probability that an irrelevant image carries query-bearing metadata.
    pub meta_given_irrelevant: f64,
    /// Share of irrelevant images that are flat drawings.
    pub drawing_fraction: f64,
    pub min_side: u32,
    pub max_side: u32,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            query: "penguin".into(),
            images: 200,
            relevant_fraction: 0.4,
            head: 50,
            head_relevant_fraction: 0.4,
            meta_given_relevant: 0.8,
            meta_given_irrelevant: 0.1,
            drawing_fraction: 0.25,
            min_side: 120,
            max_side: 160,
        }
    }
}

const FILLER: &[&str] = &[
    "photo", "gallery", "holiday", "summer", "travel", "blog", "posted", "view", "home", "about",
    "image", "picture", "archive", "news", "city", "market", "garden", "weekend", "trip", "click",
];

fn filler(rng: &mut dyn RngCore, words: usize) -> Vec<String> {
    (0..words)
        .map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string())
        .collect()
}

/// Relevant images share one visual distribution: cool blue-white gradients
/// with moderate texture. Irrelevant images are random photos of any palette
/// and noise level, plus flat drawings.
fn relevant_style(rng: &mut dyn RngCore) -> PhotoStyle {
    let mut jitter = |v: f64| v + rng.random_range(-12.0..12.0);
    PhotoStyle {
        top: [jitter(60.0), jitter(110.0), jitter(190.0)],
        bottom: [jitter(225.0), jitter(230.0), jitter(240.0)],
        noise_sigma: 18.0,
    }
}

fn irrelevant_style(rng: &mut dyn RngCore) -> PhotoStyle {
    let mut color = || {
        let mut c = [0.0; 3];
        let base = rng.random_range(20.0..235.0);
        for v in &mut c {
            *v = (base + rng.random_range(-80.0f64..80.0)).clamp(0.0, 255.0);
        }
        c
    };
    let top = color();
    let bottom = color();
    PhotoStyle {
        top,
        bottom,
        noise_sigma: rng.random_range(3.0..60.0),
    }
}

/// Builds a single-query corpus with planted relevance.
///
/// The head of the text ranking holds exactly
/// `round(head * head_relevant_fraction)` relevant images, so baseline
/// precision at `head` is fixed by construction.
pub fn planted_corpus(rng: &mut dyn RngCore, spec: &PlantedSpec) -> Vec<PlantedImage> {
    let n = spec.images;
    let n_rel = (n as f64 * spec.relevant_fraction).round() as usize;
    let head = spec.head.min(n);
    let head_rel = ((head as f64 * spec.head_relevant_fraction).round() as usize).min(n_rel);

    let mut head_slots: Vec<bool> = (0..head).map(|i| i < head_rel).collect();
    let mut tail_slots: Vec<bool> = (0..n - head).map(|i| i < n_rel - head_rel).collect();
    head_slots.shuffle(rng);
    tail_slots.shuffle(rng);

    let terms = crate::text::query_terms(&spec.query);
    let phrase = terms.join(" ");
    head_slots
        .into_iter()
        .chain(tail_slots)
        .enumerate()
        .map(|(i, relevant)| {
            let rank = i as u32 + 1;
            let w = rng.random_range(spec.min_side..=spec.max_side);
            let h = rng.random_range(spec.min_side..=spec.max_side);
            let image = if relevant {
                let style = relevant_style(rng);
                textured_photo(rng, w, h, &style)
            } else if rng.random_bool(spec.drawing_fraction) {
                flat_drawing(rng, w, h)
            } else {
                let style = irrelevant_style(rng);
                textured_photo(rng, w, h, &style)
            };
            let p_meta = if relevant {
                spec.meta_given_relevant
            } else {
                spec.meta_given_irrelevant
            };
            let bearing = rng.random_bool(p_meta);

            let mut before = filler(rng, 10);
            let mut after = filler(rng, 10);
            let (alt_text, stem, page_title) = if bearing {
                before[9] = phrase.clone();
                after[0] = "seen".into();
                let stem = if rng.random_bool(0.5) {
                    format!("{}_{rank:03}", terms.join("_"))
                } else {
                    format!("img_{rank:03}")
                };
                let title = if rng.random_bool(0.5) {
                    format!("All about the {phrase}")
                } else {
                    "Photo gallery".to_string()
                };
                (format!("a {phrase} in the wild"), stem, title)
            } else {
                (filler(rng, 3).join(" "), format!("img_{rank:03}"), "Photo gallery".to_string())
            };
            PlantedImage {
                image,
                relevant,
                rank,
                image_url: format!("http://example.test/media/{stem}.png"),
                page_url: format!("http://example.test/pages/{rank}.html"),
                alt_text,
                surrounding_text: format!("{} {}", before.join(" "), after.join(" ")),
                page_title,
            }
        })
        .collect()
}

impl PlantedImage {
    /// The page that embeds this image, as a search provider would serve it.
    pub fn page_html(&self) -> String {
        let (before, after) = split_words(&self.surrounding_text);
        format!(
            "<html><head><title>{}</title></head><body><p>{}</p><img src=\"{}\" alt=\"{}\"><p>{}</p></body></html>\n",
            self.page_title, before, self.image_url, self.alt_text, after
        )
    }

    /// Record for a store, with metadata already attached.
    pub fn record(&self, query_id: &str) -> ImageRecord {
        let mut r = ImageRecord::new(query_id, &self.image_url, self.rank, self.image.width(), self.image.height());
        r.page_url = Some(self.page_url.clone());
        r.alt_text = self.alt_text.clone();
        r.surrounding_text = self.surrounding_text.clone();
        r.page_title = self.page_title.clone();
        r.approach = Approach::DirectImageSearch;
        r
    }
}

fn split_words(text: &str) -> (String, String) {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mid = words.len() / 2;
    (words[..mid].join(" "), words[mid..].join(" "))
}

/// Writes a planted corpus as a fixture-provider directory
/// (`hits.jsonl`, `pages/`, `images/`).
pub fn write_fixture(dir: &Path, images: &[PlantedImage]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir.join("pages"))?;
    std::fs::create_dir_all(dir.join("images"))?;
    let mut hits = String::new();
    for p in images {
        let hit = SearchHit {
            image_url: p.image_url.clone(),
            page_url: Some(p.page_url.clone()),
            snippet: None,
            rank: p.rank,
        };
        hits.push_str(&serde_json::to_string(&hit).expect("hit serializes"));
        hits.push('\n');
        std::fs::write(FixtureProvider::page_path(dir, &p.page_url), p.page_html())?;
        std::fs::write(FixtureProvider::image_path(dir, &p.image_url), png_bytes(&p.image))?;
    }
    std::fs::write(dir.join("hits.jsonl"), hits)
}
