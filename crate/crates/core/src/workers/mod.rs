//! Who does the work: worker profiles, the worker contract and the concrete
//! worker families (scripted, synthetic, console-bridged humans), plus the
//! marketplace bid selector used by the human-only baseline.

mod human;
mod marketplace;
mod pool;
mod scripted;
mod synthetic;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deliverable::Deliverable;
use crate::orchestrator::PlanStep;

pub use human::HumanBridge;
pub use marketplace::{marketplace_select, Bid, MarketError};
pub use pool::{load_pool, PoolError, WorkerPool};
pub use scripted::{ScriptedWorker, DEFAULT_TASK};
pub use synthetic::{
    sample_outcome, CostModel, Lognormal, ModelError, Outcome, QualityDist, SyntheticWorker,
    SyntheticWorkerModel, DRAWS_PER_OUTCOME,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerKind {
    Ai,
    Expert,
    QaExpert,
}

impl WorkerKind {
    pub fn is_human(self) -> bool {
        !matches!(self, WorkerKind::Ai)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WorkerKind::Ai => "ai",
            WorkerKind::Expert => "expert",
            WorkerKind::QaExpert => "qa_expert",
        }
    }
}

impl fmt::Display for WorkerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub worker_id: String,
    pub kind: WorkerKind,
    pub skills: BTreeSet<String>,
    /// USD per hour; for AI workers, usage cost per hour-equivalent.
    pub cost_rate: f64,
    pub speed_factor: f64,
    /// Milliseconds on the host clock.
    #[serde(default)]
    pub availability_at: i64,
}

impl WorkerProfile {
    pub fn new(worker_id: &str, kind: WorkerKind, skills: &[&str], cost_rate: f64) -> Self {
        WorkerProfile {
            worker_id: worker_id.to_string(),
            kind,
            skills: skills.iter().map(|s| s.to_string()).collect(),
            cost_rate,
            speed_factor: 1.0,
            availability_at: 0,
        }
    }

    pub fn covers(&self, required: &BTreeSet<String>) -> bool {
        required.is_subset(&self.skills)
    }

    pub fn missing_skills(&self, required: &BTreeSet<String>) -> BTreeSet<String> {
        required.difference(&self.skills).cloned().collect()
    }
}

/// Everything a worker sees when asked to perform a step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub task_id: &'a str,
    pub step: &'a PlanStep,
    /// Outputs of earlier steps, in plan order.
    pub inputs: &'a [Deliverable],
    /// Notes from the last gate rejection or QA failure, if any.
    pub notes: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub deliverable: Deliverable,
    pub elapsed_h: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkerError {
    #[error("worker {worker_id} unavailable: {reason}")]
    WorkerUnavailable { worker_id: String, reason: String },
    #[error("worker {worker_id} lacks skills {missing:?}")]
    SkillMismatch {
        worker_id: String,
        missing: BTreeSet<String>,
    },
}

pub trait Worker {
    fn profile(&self) -> &WorkerProfile;

    fn perform_step(&mut self, ctx: &StepContext<'_>) -> Result<StepOutput, WorkerError>;
}

/// Rejects steps whose skills the worker does not have.
pub fn check_skills(profile: &WorkerProfile, step: &PlanStep) -> Result<(), WorkerError> {
    let missing = profile.missing_skills(&step.required_skills);
    if missing.is_empty() {
        Ok(())
    } else {
        Err(WorkerError::SkillMismatch {
            worker_id: profile.worker_id.clone(),
            missing,
        })
    }
}
