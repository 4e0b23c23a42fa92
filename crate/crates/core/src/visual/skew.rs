//! Document skew estimation from horizontal projection profiles.
//!
//! The image is binarized with a global Otsu threshold and the minority class
//! is taken as ink. Ink pixels inside the inscribed disc are projected onto the
//! vertical axis of every candidate rotation and binned to the nearest row; the
//! angle whose row-count profile has the largest variance wins. Restricting to
//! the disc keeps the profile envelope identical across angles, so only line
//! structure changes the variance.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::histogram::gray_levels;

/// Candidate rotations `-range_deg..=range_deg` in increments of `step_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkewSearch {
    pub range_deg: f64,
    pub step_deg: f64,
    /// Minimum ratio between the best profile variance and the median over
    /// the sweep for the peak to count as line structure.
    pub min_peak_ratio: f64,
}

impl Default for SkewSearch {
    fn default() -> Self {
        Self {
            range_deg: 10.0,
            step_deg: 0.5,
            min_peak_ratio: 1.1,
        }
    }
}

impl SkewSearch {
    fn angles(&self) -> Vec<f64> {
        let steps = (self.range_deg / self.step_deg).round() as i64;
        (-steps..=steps).map(|i| i as f64 * self.step_deg).collect()
    }
}

/// Otsu threshold over 8-bit levels: pixels `<= t` form the dark class.
/// `None` when all pixels share one level.
pub fn otsu_threshold(levels: &[u8]) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in levels {
        hist[usize::from(v)] += 1;
    }
    let total = levels.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best: Option<(f64, u8)> = None;
    for t in 0..255usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1).powi(2);
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, t as u8));
        }
    }
    best.map(|(_, t)| t)
}

/// Estimated skew of text-like line structure in degrees, or `None` when the
/// image has no dominant horizontal line structure within the search range.
///
/// A positive angle means the lines were rotated counter-clockwise as
/// displayed (image y axis pointing down).
pub fn text_skew_angle(img: &RgbImage, search: &SkewSearch) -> Option<f64> {
    let (w, h) = img.dimensions();
    if w < 3 || h < 3 {
        return None;
    }
    let levels = gray_levels(img);
    let t = otsu_threshold(&levels)?;
    let dark = levels.iter().filter(|&&v| v <= t).count();
    let ink_is_dark = dark * 2 <= levels.len();

    let cx = (f64::from(w) - 1.0) / 2.0;
    let cy = (f64::from(h) - 1.0) / 2.0;
    let radius = f64::from(w.min(h)) / 2.0;
    let mut ink = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = levels[(y * w + x) as usize];
            if (v <= t) != ink_is_dark {
                continue;
            }
            let (dx, dy) = (f64::from(x) - cx, f64::from(y) - cy);
            if dx * dx + dy * dy <= radius * radius {
                ink.push((dx, dy));
            }
        }
    }
    if ink.is_empty() {
        return None;
    }

    let bins = 2 * radius.ceil() as usize + 3;
    let offset = radius.ceil() + 1.0;
    let mut profile = vec![0u32; bins];
    let sweep: Vec<(f64, f64)> = search
        .angles()
        .into_iter()
        .map(|a| {
            let (s, c) = a.to_radians().sin_cos();
            profile.iter_mut().for_each(|b| *b = 0);
            for &(dx, dy) in &ink {
                let row = (dx * s + dy * c + offset).round() as usize;
                profile[row] += 1;
            }
            (a, population_variance(&profile))
        })
        .collect();

    let (best_angle, best_var) = sweep.iter().copied().fold((0.0f64, f64::NEG_INFINITY), |acc, (a, v)| {
        if v > acc.1 || (v == acc.1 && a.abs() < acc.0.abs()) {
            (a, v)
        } else {
            acc
        }
    });
    let mut vars: Vec<f64> = sweep.iter().map(|&(_, v)| v).collect();
    vars.sort_by(f64::total_cmp);
    let median = vars[vars.len() / 2];
    if best_var <= 0.0 || best_var < search.min_peak_ratio * median {
        return None;
    }
    Some(best_angle)
}

fn population_variance(counts: &[u32]) -> f64 {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| f64::from(c)).sum::<f64>() / n;
    counts.iter().map(|&c| (f64::from(c) - mean).powi(2)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{noise_photo, striped_page};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unrotated_stripes_give_zero() {
        let img = striped_page(240, 240, 0.0);
        assert_eq!(text_skew_angle(&img, &SkewSearch::default()), Some(0.0));
    }

    #[test]
    fn rotated_stripes_recover_angle() {
        let img = striped_page(240, 240, 5.0);
        let a = text_skew_angle(&img, &SkewSearch::default()).unwrap();
        assert!((4.0..=6.0).contains(&a), "{a}");
    }

    #[test]
    fn uniform_gray_has_no_skew() {
        let img = RgbImage::from_pixel(100, 100, image::Rgb([128, 128, 128]));
        assert_eq!(text_skew_angle(&img, &SkewSearch::default()), None);
    }

    #[test]
    fn noise_has_no_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = noise_photo(&mut rng, 128, 128);
        assert_eq!(text_skew_angle(&img, &SkewSearch::default()), None);
    }

    #[test]
    fn otsu_splits_two_levels() {
        let t = otsu_threshold(&[10, 10, 10, 200, 200]).unwrap();
        assert!((10..200).contains(&t));
        assert_eq!(otsu_threshold(&[5, 5, 5]), None);
    }
}
