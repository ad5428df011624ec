//! Diagnostic sessions over the alignment engine: file-backed storage,
//! per-session serialized mutation and an HTTP/JSON API.

pub mod error;
pub mod http;
pub mod service;

pub use error::ServiceError;
pub use service::{KbSummary, Service, SessionSummary};
