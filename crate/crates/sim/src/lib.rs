//! Seeded discrete-event simulator that drives the orchestrator with
//! synthetic workers under the hybrid, AI-only and human-only regimes and
//! emits one [`SimRecord`] per task.

mod config;
mod output;
mod queue;
mod record;
mod run;

use gatework_core::orchestrator::driver::DriveError;
use thiserror::Error;

pub use config::{
    CategoryShare, HybridParams, Regime, Scenario, SimConfig, ROLE_AI, ROLE_EXPERT, ROLE_FREELANCER, ROLE_QA,
};
pub use output::{write_run, RunManifest, MANIFEST_LABEL};
pub use queue::{EventQueue, QueueError};
pub use record::{from_centi, from_jsonl, to_centi, to_jsonl, SimRecord};
pub use run::{regime_pool, run_sharded, run_simulation, simulate_task, task_id, task_rng};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("task {0} stopped making progress")]
    Stalled(String),
    #[error("io: {0}")]
    Io(String),
}

impl SimError {
    fn from_drive(e: impl Into<DriveError>) -> Self {
        SimError::Drive(e.into())
    }
}
