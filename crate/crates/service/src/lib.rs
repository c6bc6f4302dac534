//! HTTP service for running a live dose-finding trial: trial creation,
//! cohort submission, posterior summaries, previews and recommendations,
//! backed by append-only per-trial logs.

pub mod api;
pub mod error;
pub mod http;
pub mod store;

pub use error::{ApiError, ApiResult, FieldError};
pub use http::{router, AppState, IDEMPOTENCY_HEADER};
pub use store::{load_log, LogRecord, Store, TrialRecord};
