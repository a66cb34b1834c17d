//! HTTP service over the saathi chat engine: sessions, message turns,
//! feedback, the text-to-speech hook and the admin analytics bundle.

pub mod api;
pub mod config;
pub mod feedback;
pub mod report;
pub mod sessions;
pub mod store;
pub mod tts;

pub use api::{router, AppState};
pub use config::ServerConfig;
