use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PlanStep;
use crate::task::{Phase, TaskState};
use crate::workers::{WorkerKind, WorkerProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingRequest {
    pub required_skills: BTreeSet<String>,
    /// Hours.
    #[serde(default)]
    pub deadline_hint: Option<f64>,
    /// USD.
    #[serde(default)]
    pub budget_hint: Option<f64>,
    /// Template base hours of the work being routed.
    #[serde(default = "one_hour")]
    pub base_hours: f64,
}

fn one_hour() -> f64 {
    1.0
}

impl RoutingRequest {
    pub fn for_step(step: &PlanStep) -> Self {
        RoutingRequest {
            required_skills: step.required_skills.clone(),
            deadline_hint: None,
            budget_hint: None,
            base_hours: step.base_hours,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub worker_id: String,
    pub kind: WorkerKind,
    /// Hours.
    pub time_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("no worker covers skills {0:?}")]
    NoMatch(BTreeSet<String>),
    #[error("routing request has no required skills")]
    EmptyRequest,
    #[error("cannot escalate from phase {0}")]
    WrongPhase(Phase),
}

fn estimate(base_hours: f64, w: &WorkerProfile) -> f64 {
    base_hours * (1.0 / w.speed_factor)
}

/// Cheapest qualified worker, then earliest available, then smallest id.
/// Deadline and budget hints narrow the choice when some worker meets them.
pub fn match_worker(req: &RoutingRequest, pool: &[WorkerProfile]) -> Result<Match, RoutingError> {
    match_filtered(req, pool, |_| true)
}

fn match_filtered(
    req: &RoutingRequest,
    pool: &[WorkerProfile],
    admit: impl Fn(&WorkerProfile) -> bool,
) -> Result<Match, RoutingError> {
    if req.required_skills.is_empty() {
        return Err(RoutingError::EmptyRequest);
    }
    let qualified: Vec<&WorkerProfile> = pool
        .iter()
        .filter(|w| admit(w) && w.covers(&req.required_skills))
        .collect();
    let within_hints: Vec<&WorkerProfile> = qualified
        .iter()
        .copied()
        .filter(|w| {
            let t = estimate(req.base_hours, w);
            req.deadline_hint.map_or(true, |d| t <= d) && req.budget_hint.map_or(true, |b| t * w.cost_rate <= b)
        })
        .collect();
    let candidates = if within_hints.is_empty() { qualified } else { within_hints };
    candidates
        .into_iter()
        .min_by(|a, b| {
            a.cost_rate
                .total_cmp(&b.cost_rate)
                .then(a.availability_at.cmp(&b.availability_at))
                .then_with(|| a.worker_id.cmp(&b.worker_id))
        })
        .map(|w| Match {
            worker_id: w.worker_id.clone(),
            kind: w.kind,
            time_estimate: estimate(req.base_hours, w),
        })
        .ok_or_else(|| RoutingError::NoMatch(req.required_skills.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscalationKind {
    ConflictingSources,
    FailedChecks,
    HighRiskStep,
    LowSelfConsistency,
}

impl EscalationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EscalationKind::ConflictingSources => "conflicting_sources",
            EscalationKind::FailedChecks => "failed_checks",
            EscalationKind::HighRiskStep => "high_risk_step",
            EscalationKind::LowSelfConsistency => "low_self_consistency",
        }
    }
}

impl fmt::Display for EscalationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationReason {
    pub kind: EscalationKind,
    pub detail: String,
}

impl EscalationReason {
    pub fn new(kind: EscalationKind, detail: impl Into<String>) -> Self {
        EscalationReason {
            kind,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub step_index: u32,
    pub worker_id: String,
    pub kind: WorkerKind,
    pub time_estimate: f64,
    pub reason: EscalationReason,
}

/// Route an escalated step to a human. During offline QA a QA expert is
/// preferred and a domain expert accepted; otherwise only experts qualify.
pub fn escalate(
    task: &TaskState,
    step: &PlanStep,
    reason: EscalationReason,
    pool: &[WorkerProfile],
) -> Result<Assignment, RoutingError> {
    let req = RoutingRequest::for_step(step);
    let m = match task.phase {
        Phase::Executing | Phase::OnlineQA => match_filtered(&req, pool, |w| w.kind == WorkerKind::Expert)?,
        Phase::OfflineQA => match_filtered(&req, pool, |w| w.kind == WorkerKind::QaExpert)
            .or_else(|_| match_filtered(&req, pool, |w| w.kind == WorkerKind::Expert))?,
        other => return Err(RoutingError::WrongPhase(other)),
    };
    Ok(Assignment {
        step_index: step.index,
        worker_id: m.worker_id,
        kind: m.kind,
        time_estimate: m.time_estimate,
        reason,
    })
}
