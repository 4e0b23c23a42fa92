//! Visual features of candidate images and drawing/symbolic-image detection.

mod histogram;
mod skew;
mod symbolic;

pub use histogram::{
    energy, entropy, gray_levels, grayscale_histogram, luma, skewness, skewness_of, Histogram256,
};
pub use skew::{otsu_threshold, text_skew_angle, SkewSearch};
pub use symbolic::{
    classify_symbolic, drawing_features, DrawingFeatures, Naturalness, NaturalnessVerdict,
    SymbolicThresholds, EDGE_THRESHOLD, RULE_COUNT,
};

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum VisualError {
    #[error("image has no pixels")]
    DegenerateImage,
    #[error("histogram is not a probability distribution")]
    InvalidHistogram,
    #[error("unsupported image format {0}")]
    UnsupportedFormat(String),
    #[error("decode failed: {0}")]
    Decode(#[from] image::ImageError),
}

/// Decodes PNG, JPEG, GIF (first frame) or BMP bytes into RGB pixels.
pub fn decode(bytes: &[u8]) -> Result<RgbImage, VisualError> {
    let format = image::guess_format(bytes)?;
    match format {
        ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Gif | ImageFormat::Bmp => {}
        other => return Err(VisualError::UnsupportedFormat(format!("{other:?}"))),
    }
    Ok(image::load_from_memory_with_format(bytes, format)?.to_rgb8())
}

/// MIME type for a supported blob, if recognized.
pub fn mime_type(bytes: &[u8]) -> Option<&'static str> {
    match image::guess_format(bytes).ok()? {
        ImageFormat::Png => Some("image/png"),
        ImageFormat::Jpeg => Some("image/jpeg"),
        ImageFormat::Gif => Some("image/gif"),
        ImageFormat::Bmp => Some("image/bmp"),
        _ => None,
    }
}

/// Everything measured on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualFeatures {
    pub width: u32,
    pub height: u32,
    /// Pixel count.
    pub size: u64,
    /// Grayscale entropy in bits.
    pub entropy: f64,
    /// Grayscale histogram energy.
    pub energy: f64,
    /// Grayscale intensity skewness.
    pub skewness: f64,
    /// Document skew angle in degrees, when line structure was found.
    pub text_skew_deg: Option<f64>,
    pub distinct_color_ratio: f64,
    pub edge_density: f64,
    pub saturation_mean: f64,
}

/// Names of the entries of [`VisualFeatures::ranking_vector`], in order.
pub const RANKING_FEATURES: [&str; 9] = [
    "width",
    "height",
    "size",
    "entropy",
    "energy",
    "skewness",
    "distinct_color_ratio",
    "edge_density",
    "saturation_mean",
];

impl VisualFeatures {
    pub fn compute(img: &RgbImage) -> Result<Self, VisualError> {
        Self::compute_with(img, &SkewSearch::default())
    }

    pub fn compute_with(img: &RgbImage, search: &SkewSearch) -> Result<Self, VisualError> {
        let levels = gray_levels(img);
        let hist = Histogram256::from_levels(&levels)?;
        let values: Vec<f64> = levels.iter().map(|&v| f64::from(v)).collect();
        let drawing = drawing_features(img);
        Ok(Self {
            width: img.width(),
            height: img.height(),
            size: u64::from(img.width()) * u64::from(img.height()),
            entropy: entropy(&hist),
            energy: energy(&hist),
            skewness: skewness_of(&values),
            text_skew_deg: text_skew_angle(img, search),
            distinct_color_ratio: drawing.distinct_color_ratio,
            edge_density: drawing.edge_density,
            saturation_mean: drawing.saturation_mean,
        })
    }

    /// The real-valued features used for prototypes and clustering.
    pub fn ranking_vector(&self) -> Vec<f64> {
        vec![
            f64::from(self.width),
            f64::from(self.height),
            self.size as f64,
            self.entropy,
            self.energy,
            self.skewness,
            self.distinct_color_ratio,
            self.edge_density,
            self.saturation_mean,
        ]
    }
}
