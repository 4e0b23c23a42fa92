//! Drawing and symbolic-image detection.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::histogram::gray_levels;
use super::VisualFeatures;

/// Number of voting rules in [`classify_symbolic`].
pub const RULE_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawingFeatures {
    pub distinct_color_ratio: f64,
    pub edge_density: f64,
    pub saturation_mean: f64,
}

/// Gradient magnitude (on grayscale scaled to `[0, 1]`) above which a pixel counts as an edge.
pub const EDGE_THRESHOLD: f64 = 16.0 / 255.0;

/// Color variety, edge density and mean HSV saturation.
///
/// Colors are quantized to 4 bits per channel before counting. Gradients are
/// central differences with replicated borders.
pub fn drawing_features(img: &RgbImage) -> DrawingFeatures {
    let (w, h) = img.dimensions();
    let n = f64::from(w) * f64::from(h);
    if n == 0.0 {
        return DrawingFeatures {
            distinct_color_ratio: 0.0,
            edge_density: 0.0,
            saturation_mean: 0.0,
        };
    }

    let mut seen = vec![false; 4096];
    let mut distinct = 0usize;
    let mut sat_sum = 0.0;
    for p in img.pixels() {
        let key = (usize::from(p[0] >> 4) << 8) | (usize::from(p[1] >> 4) << 4) | usize::from(p[2] >> 4);
        if !seen[key] {
            seen[key] = true;
            distinct += 1;
        }
        let max = p.0.iter().copied().max().unwrap_or(0);
        let min = p.0.iter().copied().min().unwrap_or(0);
        if max > 0 {
            sat_sum += f64::from(max - min) / f64::from(max);
        }
    }

    let gray: Vec<f64> = gray_levels(img).into_iter().map(|v| f64::from(v) / 255.0).collect();
    let at = |x: i64, y: i64| {
        let x = x.clamp(0, i64::from(w) - 1) as usize;
        let y = y.clamp(0, i64::from(h) - 1) as usize;
        gray[y * w as usize + x]
    };
    let mut edges = 0usize;
    for y in 0..i64::from(h) {
        for x in 0..i64::from(w) {
            let gx = (at(x + 1, y) - at(x - 1, y)) / 2.0;
            let gy = (at(x, y + 1) - at(x, y - 1)) / 2.0;
            if (gx * gx + gy * gy).sqrt() > EDGE_THRESHOLD {
                edges += 1;
            }
        }
    }

    DrawingFeatures {
        distinct_color_ratio: distinct as f64 / n,
        edge_density: edges as f64 / n,
        saturation_mean: sat_sum / n,
    }
}

/// Per-rule cutoffs for the symbolic vote. A rule fires when the feature is below its cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolicThresholds {
    pub entropy: f64,
    pub distinct_color_ratio: f64,
    pub edge_density: f64,
    pub saturation: f64,
    /// Also vote when a document skew angle was found.
    pub skew_vote: bool,
    /// Votes needed for a symbolic verdict.
    pub min_votes: u32,
}

impl Default for SymbolicThresholds {
    fn default() -> Self {
        Self {
            entropy: 4.0,
            distinct_color_ratio: 0.02,
            edge_density: 0.02,
            saturation: 0.05,
            skew_vote: true,
            min_votes: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Naturalness {
    Natural,
    Symbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalnessVerdict {
    pub class: Naturalness,
    /// Number of rules that fired; higher means more drawing-like.
    pub score: f64,
}

impl NaturalnessVerdict {
    pub fn is_symbolic(&self) -> bool {
        self.class == Naturalness::Symbolic
    }

    /// `1 - score / RULE_COUNT`, clipped to `[0, 1]`.
    pub fn naturalness(&self) -> f64 {
        (1.0 - self.score / RULE_COUNT as f64).clamp(0.0, 1.0)
    }
}

pub fn classify_symbolic(f: &VisualFeatures, t: &SymbolicThresholds) -> NaturalnessVerdict {
    let votes = [
        f.entropy < t.entropy,
        f.distinct_color_ratio < t.distinct_color_ratio,
        f.edge_density < t.edge_density,
        f.saturation_mean < t.saturation,
        t.skew_vote && f.text_skew_deg.is_some(),
    ]
    .into_iter()
    .filter(|&v| v)
    .count() as u32;
    let class = if votes >= t.min_votes.max(1) {
        Naturalness::Symbolic
    } else {
        Naturalness::Natural
    };
    NaturalnessVerdict {
        class,
        score: f64::from(votes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{flat_drawing, noise_photo};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_flat_colors() {
        let mut img = RgbImage::from_pixel(40, 30, image::Rgb([250, 20, 20]));
        for y in 0..30 {
            for x in 20..40 {
                img.put_pixel(x, y, image::Rgb([20, 20, 250]));
            }
        }
        let f = drawing_features(&img);
        assert_eq!(f.distinct_color_ratio, 2.0 / 1200.0);
        // only the two columns straddling the boundary see a gradient
        assert_eq!(f.edge_density, 60.0 / 1200.0);
    }

    #[test]
    fn single_color_has_no_edges() {
        let img = RgbImage::from_pixel(10, 10, image::Rgb([1, 200, 3]));
        let f = drawing_features(&img);
        assert_eq!(f.edge_density, 0.0);
        assert_eq!(f.distinct_color_ratio, 0.01);
    }

    #[test]
    fn grayscale_has_zero_saturation() {
        let img = RgbImage::from_fn(16, 16, |x, y| {
            let v = (x * 16 + y) as u8;
            image::Rgb([v, v, v])
        });
        assert_eq!(drawing_features(&img).saturation_mean, 0.0);
    }

    fn features(votes: &[bool; 5]) -> VisualFeatures {
        VisualFeatures {
            width: 10,
            height: 10,
            size: 100,
            entropy: if votes[0] { 1.0 } else { 7.0 },
            energy: 0.1,
            skewness: 0.0,
            text_skew_deg: votes[4].then_some(1.0),
            distinct_color_ratio: if votes[1] { 0.001 } else { 0.5 },
            edge_density: if votes[2] { 0.0 } else { 0.5 },
            saturation_mean: if votes[3] { 0.0 } else { 0.5 },
        }
    }

    #[test]
    fn vote_table() {
        let t = SymbolicThresholds::default();
        let none = classify_symbolic(&features(&[false; 5]), &t);
        assert_eq!((none.class, none.score), (Naturalness::Natural, 0.0));
        assert_eq!(none.naturalness(), 1.0);
        for i in 0..5 {
            let mut v = [false; 5];
            v[i] = true;
            assert_eq!(classify_symbolic(&features(&v), &t).class, Naturalness::Natural);
        }
        let two = classify_symbolic(&features(&[true, false, false, false, true]), &t);
        assert_eq!((two.class, two.score), (Naturalness::Symbolic, 2.0));
        let all = classify_symbolic(&features(&[true; 5]), &t);
        assert_eq!(all.naturalness(), 0.0);
    }

    #[test]
    fn cartoon_vs_photo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = SymbolicThresholds::default();
        let cartoon = VisualFeatures::compute(&flat_drawing(&mut rng, 128, 128)).unwrap();
        assert!(cartoon.entropy < 4.0 && cartoon.distinct_color_ratio < 0.02);
        assert!(classify_symbolic(&cartoon, &t).is_symbolic());
        let photo = VisualFeatures::compute(&noise_photo(&mut rng, 128, 128)).unwrap();
        assert!(photo.entropy > 6.0, "{}", photo.entropy);
        assert!(!classify_symbolic(&photo, &t).is_symbolic());
    }
}
