//! Retrieval-augmented health chat engine: translate the user's query,
//! answer it from a curated knowledge base, then localize the answer.

pub mod analytics;
pub mod assets;
pub mod cultural;
pub mod gateway;
pub mod generation;
pub mod knowledge;
pub mod localization;
pub mod logstore;
pub mod model;
pub mod pipeline;
pub mod stack;
pub mod text;
pub mod translation;
