//! Service and command-line surface over the workflow engine.
//!
//! [`store`] keeps one append-only event file per task and rebuilds its index
//! from disk at startup. [`api`] exposes the store over JSON/HTTP, and
//! [`commands`] holds the offline subcommands (simulation, statistics,
//! dataset validation, replay).

pub mod api;
pub mod commands;
pub mod store;

pub use api::{router, ApiEnvelope, ErrorBody, EXPERT_HEADER, REQUEST_ID_HEADER};
pub use store::{
    ApiError, DecisionRequest, DeliverableUpload, EventPage, Layout, Store, StoreConfig, StoreError, StoreStats,
    SystemClock, TaskSummary, TaskView,
};

/// Environment variable that overrides `--root`.
pub const ROOT_ENV: &str = "GATEWORK_ROOT";
