//! Command line, configuration, HTML report and HTTP service.

pub mod cli;
pub mod config;
pub mod report;
pub mod service;

pub use config::{ConfigError, PipelineConfig, STORE_ENV};
pub use report::{html_report, ImageCard, ReportError};
pub use service::{router, serve, AppState};
