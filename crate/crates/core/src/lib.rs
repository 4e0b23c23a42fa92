//! Query-independent reranking of text-based image search results.
//!
//! Candidates for a query are acquired from a search provider, described by
//! textual bits and visual features, filtered for symbolic images, clustered,
//! and reordered by a linear model trained on labeled queries.

pub mod acquisition;
pub mod app;
pub mod corpus;
pub mod evaluation;
pub mod kmeans;
pub mod numfmt;
pub mod pipeline;
pub mod reranker;
pub mod synthetic;
pub mod text;
pub mod textual;
pub mod visual;
