use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Plan;
use crate::audit::{AuditEvent, Payload};
use crate::task::{apply_event, Actor, EventKind, StepPhase, TaskState, TransitionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    RejectWithNotes,
    EditAndApprove,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateDecision {
    pub step_index: u32,
    pub decision: Decision,
    #[serde(default)]
    pub notes: String,
    pub decided_by: String,
    /// Milliseconds on the host clock.
    pub decided_at: i64,
    /// Replacement step description for `edit_and_approve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GateError {
    #[error("step {0} has no pending gate")]
    NoPendingGate(u32),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Apply an expert's decision on a pending gate. Returns the successor state,
/// the updated plan and the event to append (its `seq` is the task version).
pub fn handle_gate_decision(
    task: &TaskState,
    plan: &Plan,
    d: &GateDecision,
) -> Result<(TaskState, Plan, AuditEvent), GateError> {
    let pending = task
        .step(d.step_index)
        .is_some_and(|s| s.gated && s.status == StepPhase::AwaitingGate);
    if !pending || plan.step(d.step_index).is_none() {
        return Err(GateError::NoPendingGate(d.step_index));
    }
    let mut payload = Payload::new()
        .with("decision", d.decision)
        .with("notes", &d.notes)
        .with("decided_by", &d.decided_by);
    let kind = match d.decision {
        Decision::Approve => EventKind::GateApproved(d.step_index),
        Decision::RejectWithNotes => {
            if d.notes.trim().is_empty() {
                return Err(GateError::InvalidDecision("reject requires notes".into()));
            }
            EventKind::GateRejected(d.step_index)
        }
        Decision::EditAndApprove => {
            let text = d
                .edited_description
                .as_deref()
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| GateError::InvalidDecision("edit_and_approve requires edited_description".into()))?;
            payload.insert("edited_description", text);
            EventKind::GateApproved(d.step_index)
        }
    };
    let event = AuditEvent::new(task.version, d.decided_at, Actor::Expert, kind, payload);
    let next = apply_event(task, &event)?;
    let mut next_plan = plan.clone();
    next_plan.observe(kind, &event.payload);
    Ok((next, next_plan, event))
}
