//! Pipeline configuration: defaults, JSON file, environment, flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{ProviderConfig, DEFAULT_WINDOW, MIN_SIDE};
use crate::pipeline::AnalysisConfig;
use crate::reranker::{CvParams, RerankParams, DEFAULT_LAMBDA};
use crate::visual::{SkewSearch, SymbolicThresholds};

pub const STORE_ENV: &str = "PURESEARCH_STORE";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store: PathBuf,
    pub provider: ProviderConfig,
    pub min_size: u32,
    /// Words of page text kept on each side of an image.
    pub window: usize,
    pub prototypes: usize,
    pub pseudo_positives: usize,
    pub k: Option<usize>,
    pub lambda: f64,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Clustering runs and agreement fraction for intermediate elimination.
    pub runs: usize,
    pub majority: f64,
    pub symbolic: SymbolicThresholds,
    pub skew: SkewSearch,
    pub bind: String,
    /// Built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let params = RerankParams::default();
        let cv = CvParams::default();
        Self {
            store: PathBuf::from("store"),
            provider: ProviderConfig::default(),
            min_size: MIN_SIDE,
            window: DEFAULT_WINDOW,
            prototypes: params.prototypes,
            pseudo_positives: params.pseudo_positives,
            k: params.k,
            lambda: DEFAULT_LAMBDA,
            folds: cv.folds,
            repeats: cv.repeats,
            seed: 42,
            runs: params.runs,
            majority: params.majority,
            symbolic: SymbolicThresholds::default(),
            skew: SkewSearch::default(),
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    /// Defaults, then the optional file, then `PURESEARCH_STORE`.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(store) = std::env::var_os(STORE_ENV).filter(|s| !s.is_empty()) {
            cfg.store = PathBuf::from(store);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.min_size < 1 {
            return bad("min_size must be >= 1");
        }
        if self.folds < 2 || self.repeats < 1 {
            return bad("folds must be >= 2 and repeats >= 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if !(self.skew.step_deg > 0.0 && self.skew.range_deg >= 0.0) {
            return bad("skew step must be > 0 and range >= 0");
        }
        self.params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.provider().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn params(&self) -> RerankParams {
        RerankParams {
            prototypes: self.prototypes,
            pseudo_positives: self.pseudo_positives,
            k: self.k,
            seed: self.seed,
            runs: self.runs,
            majority: self.majority,
        }
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            params: self.params(),
            thresholds: self.symbolic,
            skew: self.skew,
        }
    }

    pub fn cv(&self) -> CvParams {
        CvParams {
            folds: self.folds,
            repeats: self.repeats,
            seed: self.seed,
            lambda: self.lambda,
        }
    }

    pub fn provider(&self) -> ProviderConfig {
        ProviderConfig {
            min_side: self.min_size,
            window: self.window,
            ..self.provider.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.prototypes, c.pseudo_positives, c.lambda, c.folds, c.repeats, c.seed), (25, 50, 1.0, 10, 5, 42));
        assert_eq!(c.min_size, 120);
        assert_eq!(c.provider().min_side, 120);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 7, "symbolic": {"min_votes": 3}, "provider": {"max_results": 10}}"#).unwrap();
        let c = PipelineConfig::from_file(&p).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.symbolic.min_votes, 3);
        assert_eq!(c.symbolic.entropy, SymbolicThresholds::default().entropy);
        assert_eq!(c.provider.max_results, 10);
        assert_eq!(c.folds, 10);
        std::fs::write(&p, r#"{"sede": 7}"#).unwrap();
        assert!(PipelineConfig::from_file(&p).is_err());
    }

    #[test]
    fn invalid_values() {
        let c = PipelineConfig {
            majority: 0.4,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            folds: 1,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
