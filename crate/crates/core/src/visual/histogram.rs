//! Grayscale intensity distribution and the statistics computed from it.

use image::RgbImage;

use super::VisualError;

/// Luma as `0.299 R + 0.587 G + 0.114 B`, rounded and clamped to `0..=255`.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Grayscale levels of every pixel in row-major order.
pub fn gray_levels(img: &RgbImage) -> Vec<u8> {
    img.pixels().map(|p| luma(p[0], p[1], p[2])).collect()
}

/// Probability mass over the 256 grayscale intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram256 {
    p: [f64; 256],
}

impl Histogram256 {
    pub fn from_levels(levels: &[u8]) -> Result<Self, VisualError> {
        if levels.is_empty() {
            return Err(VisualError::DegenerateImage);
        }
        let mut counts = [0u64; 256];
        for &v in levels {
            counts[usize::from(v)] += 1;
        }
        let n = levels.len() as f64;
        let mut p = [0.0; 256];
        for (pi, c) in p.iter_mut().zip(counts) {
            *pi = c as f64 / n;
        }
        Ok(Self { p })
    }

    /// Accepts an explicit distribution; it must be non-negative and sum to 1 within 1e-9.
    pub fn from_probabilities(p: [f64; 256]) -> Result<Self, VisualError> {
        let sum: f64 = p.iter().sum();
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(VisualError::InvalidHistogram);
        }
        Ok(Self { p })
    }

    pub fn probabilities(&self) -> &[f64; 256] {
        &self.p
    }
}

pub fn grayscale_histogram(img: &RgbImage) -> Result<Histogram256, VisualError> {
    Histogram256::from_levels(&gray_levels(img))
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(h: &Histogram256) -> f64 {
    let e: f64 = h
        .p
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    e.clamp(0.0, 8.0)
}

/// Histogram energy `Σ p²`.
pub fn energy(h: &Histogram256) -> f64 {
    h.p.iter().map(|p| p * p).sum()
}

/// Third standardized moment with population moments; 0 when the values are constant.
pub fn skewness_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    // rounding noise around a constant sample
    let noise = 4.0 * f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE);
    if m2 <= noise * noise {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Intensity skewness of the grayscale image.
pub fn skewness(img: &RgbImage) -> f64 {
    let levels: Vec<f64> = gray_levels(img).into_iter().map(f64::from).collect();
    skewness_of(&levels)
}
