//! Task briefs and the event-sourced task lifecycle.
//!
//! Phase-level transitions:
//!
//! ```text
//! Submitted -> Clarifying -> Planning -> Routing -> Executing <-> OnlineQA
//! Executing | OnlineQA -> OfflineQA -> Finalized | Rework | OfflineQA (escalated)
//! Rework -> Executing
//! Submitted | Clarifying | Planning | Routing -> Declined
//! ```
//!
//! Inside `Executing` every plan step runs its own small machine
//! (see [`StepPhase`]): gated steps must be approved before they start, and a
//! rework (gate rejection, failed online check, offline reopen) sends the step
//! back to `Pending` and clears any earlier approval.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{AuditEvent, AuditLog, Payload};
use crate::workers::WorkerKind;

pub use crate::deliverable::{
    AttachmentRef, Citation, Deliverable, MediaKind, NamedTable, SourceText, TabularData,
};
pub use crate::taxonomy::Area;

/// Number of clarification rounds a task may go through before planning.
pub const DEFAULT_CLARIFICATION_CAP: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskBrief {
    #[serde(default)]
    pub task_id: String,
    pub area: Area,
    pub category: String,
    pub brief_text: String,
    #[serde(default)]
    pub attachments: Vec<AttachmentRef>,
    #[serde(default)]
    pub acceptance_criteria: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BriefError {
    #[error("brief text is empty")]
    EmptyText,
    #[error("category is empty")]
    EmptyCategory,
    #[error("attachment #{0} has an empty name")]
    UnnamedAttachment(usize),
}

impl TaskBrief {
    pub fn validate(&self) -> Result<(), BriefError> {
        if self.brief_text.trim().is_empty() {
            return Err(BriefError::EmptyText);
        }
        if self.category.trim().is_empty() {
            return Err(BriefError::EmptyCategory);
        }
        if let Some(i) = self.attachments.iter().position(|a| a.name.trim().is_empty()) {
            return Err(BriefError::UnnamedAttachment(i));
        }
        Ok(())
    }

    /// Digest of everything except the task id.
    pub fn content_hash(&self) -> String {
        let mut body = self.clone();
        body.task_id.clear();
        let bytes = serde_json::to_vec(&body).expect("brief serializes");
        crate::sha256_hex(&bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Submitted,
    Clarifying,
    Planning,
    Routing,
    Executing,
    OnlineQA,
    OfflineQA,
    Rework,
    Finalized,
    Declined,
}

impl Phase {
    pub const ALL: [Phase; 10] = [
        Phase::Submitted,
        Phase::Clarifying,
        Phase::Planning,
        Phase::Routing,
        Phase::Executing,
        Phase::OnlineQA,
        Phase::OfflineQA,
        Phase::Rework,
        Phase::Finalized,
        Phase::Declined,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Finalized | Phase::Declined)
    }

    pub fn is_pre_execution(self) -> bool {
        matches!(
            self,
            Phase::Submitted | Phase::Clarifying | Phase::Planning | Phase::Routing
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    System,
    AiWorker,
    Expert,
    QaExpert,
    Client,
}

impl Actor {
    pub fn for_worker(kind: WorkerKind) -> Actor {
        match kind {
            WorkerKind::Ai => Actor::AiWorker,
            WorkerKind::Expert => Actor::Expert,
            WorkerKind::QaExpert => Actor::QaExpert,
        }
    }
}

/// Slot a worker occupies on a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerRole {
    /// Performs plan steps.
    Executor,
    /// Human expert deciding gates.
    Supervisor,
    /// Human reviewer for escalated offline QA.
    QaReviewer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedWorker {
    pub worker_id: String,
    pub kind: WorkerKind,
}

/// Progress of a single plan step inside the lifecycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepPhase {
    Pending,
    AwaitingGate,
    Approved,
    InProgress,
    Done,
    /// Done and passed (or accepted by) online QA.
    Verified,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepProgress {
    pub gated: bool,
    pub status: StepPhase,
    /// Gate rejections, failed online checks and offline reopens so far.
    pub reworks: u32,
    /// Set once the step has been escalated to a human expert.
    pub escalated_to: Option<AssignedWorker>,
    #[serde(default)]
    pub escalated: bool,
}

impl StepProgress {
    fn new(gated: bool) -> Self {
        StepProgress {
            gated,
            status: StepPhase::Pending,
            reworks: 0,
            escalated_to: None,
            escalated: false,
        }
    }

    pub fn is_settled(&self) -> bool {
        matches!(
            self.status,
            StepPhase::Done | StepPhase::Verified | StepPhase::Skipped
        )
    }
}

/// Replayable state of one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskState {
    pub phase: Phase,
    /// Number of events applied so far.
    pub version: u64,
    pub current_step: Option<u32>,
    pub assigned_workers: BTreeMap<WorkerRole, AssignedWorker>,
    pub clarification_rounds: u32,
    pub clarification_cap: u32,
    pub steps: Vec<StepProgress>,
    pub offline_escalated: bool,
    pub offline_passes: u32,
}

impl Default for TaskState {
    fn default() -> Self {
        Self::initial()
    }
}

impl TaskState {
    pub fn initial() -> Self {
        Self::with_clarification_cap(DEFAULT_CLARIFICATION_CAP)
    }

    pub fn with_clarification_cap(cap: u32) -> Self {
        TaskState {
            phase: Phase::Submitted,
            version: 0,
            current_step: None,
            assigned_workers: BTreeMap::new(),
            clarification_rounds: 0,
            clarification_cap: cap.max(1),
            steps: Vec::new(),
            offline_escalated: false,
            offline_passes: 0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.phase.is_terminal()
    }

    pub fn step(&self, index: u32) -> Option<&StepProgress> {
        self.steps.get(index as usize)
    }

    /// Kind of worker acting on `step`: the escalation target if the step was
    /// escalated, otherwise the task's executor (AI when nobody is assigned).
    pub fn acting_kind(&self, step: u32) -> WorkerKind {
        match self.step(step) {
            Some(s) if s.escalated => s
                .escalated_to
                .as_ref()
                .map(|w| w.kind)
                .unwrap_or(WorkerKind::Expert),
            _ => self
                .assigned_workers
                .get(&WorkerRole::Executor)
                .map(|w| w.kind)
                .unwrap_or(WorkerKind::Ai),
        }
    }

    fn step_in_progress(&self) -> bool {
        self.steps.iter().any(|s| s.status == StepPhase::InProgress)
    }

    fn all_settled(&self) -> bool {
        !self.steps.is_empty() && self.steps.iter().all(StepProgress::is_settled)
    }

    fn status(&self, step: u32) -> Option<StepPhase> {
        self.step(step).map(|s| s.status)
    }

    /// Whether `kind` is legal from this state, independent of payload content.
    fn permits(&self, kind: EventKind) -> bool {
        use EventKind::*;
        use StepPhase as S;
        if self.phase.is_terminal() {
            return false;
        }
        let phase = self.phase;
        match kind {
            TaskSubmitted => phase == Phase::Submitted && self.version == 0,
            ClarificationStarted => phase == Phase::Submitted,
            ClarificationRound => {
                phase == Phase::Clarifying && self.clarification_rounds < self.clarification_cap
            }
            PlanningStarted => phase == Phase::Clarifying,
            PlanRecorded => phase == Phase::Planning,
            RoutingStarted => phase == Phase::Planning && !self.steps.is_empty(),
            WorkerAssigned => matches!(phase, Phase::Routing | Phase::Executing),
            ExecutionStarted => {
                phase == Phase::Routing && self.assigned_workers.contains_key(&WorkerRole::Executor)
            }
            TaskDeclined => phase.is_pre_execution(),
            GateRequested(i) => {
                phase == Phase::Executing
                    && self.step(i).is_some_and(|s| s.gated && s.status == S::Pending)
            }
            GateApproved(i) | GateRejected(i) => {
                phase == Phase::Executing && self.status(i) == Some(S::AwaitingGate)
            }
            StepStarted(i) => {
                phase == Phase::Executing
                    && !self.step_in_progress()
                    && self.step(i).is_some_and(|s| {
                        s.status == S::Approved || (s.status == S::Pending && !s.gated)
                    })
            }
            StepCompleted(i) => phase == Phase::Executing && self.status(i) == Some(S::InProgress),
            StepEscalated(i) => {
                phase == Phase::Executing
                    && self.step(i).is_some_and(|s| {
                        !s.escalated
                            && !matches!(s.status, S::InProgress | S::AwaitingGate | S::Skipped)
                    })
            }
            StepSkipped(i) => phase == Phase::Executing && self.status(i) == Some(S::Pending),
            OnlineQAStarted(i) => {
                phase == Phase::Executing
                    && !self.step_in_progress()
                    && self.status(i) == Some(S::Done)
            }
            OnlineQAPassed | OnlineQAFailed => phase == Phase::OnlineQA,
            OfflineQAStarted => {
                matches!(phase, Phase::Executing | Phase::OnlineQA)
                    && !self.step_in_progress()
                    && self.all_settled()
            }
            QAPassed | QAFailedRework => phase == Phase::OfflineQA,
            QAEscalatedToHuman => phase == Phase::OfflineQA && !self.offline_escalated,
            StepReopened(i) => {
                phase == Phase::Rework && matches!(self.status(i), Some(S::Done | S::Verified))
            }
            ReworkStarted => {
                phase == Phase::Rework && self.steps.iter().any(|s| s.status == S::Pending)
            }
        }
    }
}

/// What happened to a task. Step-scoped kinds carry the step index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "step")]
pub enum EventKind {
    TaskSubmitted,
    ClarificationStarted,
    ClarificationRound,
    PlanningStarted,
    /// Payload: `plan` with a `steps` array whose entries carry `gated`.
    PlanRecorded,
    RoutingStarted,
    /// Payload: `role`, `worker_id`, `worker_kind`.
    WorkerAssigned,
    ExecutionStarted,
    TaskDeclined,
    GateRequested(u32),
    GateApproved(u32),
    GateRejected(u32),
    StepStarted(u32),
    StepCompleted(u32),
    /// Payload: `reason`, optional `worker_id` / `worker_kind`.
    StepEscalated(u32),
    StepSkipped(u32),
    OnlineQAStarted(u32),
    OnlineQAPassed,
    OnlineQAFailed,
    OfflineQAStarted,
    QAPassed,
    QAFailedRework,
    QAEscalatedToHuman,
    StepReopened(u32),
    ReworkStarted,
}

impl EventKind {
    /// Kinds that take no step index.
    pub const PHASE_KINDS: [EventKind; 16] = [
        EventKind::TaskSubmitted,
        EventKind::ClarificationStarted,
        EventKind::ClarificationRound,
        EventKind::PlanningStarted,
        EventKind::PlanRecorded,
        EventKind::RoutingStarted,
        EventKind::WorkerAssigned,
        EventKind::ExecutionStarted,
        EventKind::TaskDeclined,
        EventKind::OnlineQAPassed,
        EventKind::OnlineQAFailed,
        EventKind::OfflineQAStarted,
        EventKind::QAPassed,
        EventKind::QAFailedRework,
        EventKind::QAEscalatedToHuman,
        EventKind::ReworkStarted,
    ];

    /// Step-scoped kinds for step `i`.
    pub fn step_kinds(i: u32) -> [EventKind; 9] {
        [
            EventKind::GateRequested(i),
            EventKind::GateApproved(i),
            EventKind::GateRejected(i),
            EventKind::StepStarted(i),
            EventKind::StepCompleted(i),
            EventKind::StepEscalated(i),
            EventKind::StepSkipped(i),
            EventKind::OnlineQAStarted(i),
            EventKind::StepReopened(i),
        ]
    }

    pub fn step(self) -> Option<u32> {
        use EventKind::*;
        match self {
            GateRequested(i) | GateApproved(i) | GateRejected(i) | StepStarted(i)
            | StepCompleted(i) | StepEscalated(i) | StepSkipped(i) | OnlineQAStarted(i)
            | StepReopened(i) => Some(i),
            _ => None,
        }
    }

    /// Name without the step index.
    pub fn name(self) -> &'static str {
        use EventKind::*;
        match self {
            TaskSubmitted => "TaskSubmitted",
            ClarificationStarted => "ClarificationStarted",
            ClarificationRound => "ClarificationRound",
            PlanningStarted => "PlanningStarted",
            PlanRecorded => "PlanRecorded",
            RoutingStarted => "RoutingStarted",
            WorkerAssigned => "WorkerAssigned",
            ExecutionStarted => "ExecutionStarted",
            TaskDeclined => "TaskDeclined",
            GateRequested(_) => "GateRequested",
            GateApproved(_) => "GateApproved",
            GateRejected(_) => "GateRejected",
            StepStarted(_) => "StepStarted",
            StepCompleted(_) => "StepCompleted",
            StepEscalated(_) => "StepEscalated",
            StepSkipped(_) => "StepSkipped",
            OnlineQAStarted(_) => "OnlineQAStarted",
            OnlineQAPassed => "OnlineQAPassed",
            OnlineQAFailed => "OnlineQAFailed",
            OfflineQAStarted => "OfflineQAStarted",
            QAPassed => "QAPassed",
            QAFailedRework => "QAFailedRework",
            QAEscalatedToHuman => "QAEscalatedToHuman",
            StepReopened(_) => "StepReopened",
            ReworkStarted => "ReworkStarted",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step() {
            Some(i) => write!(f, "{}({i})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("{kind} is not legal in phase {phase}")]
    IllegalTransition { phase: Phase, kind: EventKind },
    #[error("task is in terminal phase {phase}")]
    TerminalState { phase: Phase },
    #[error("{kind}: malformed payload: {reason}")]
    MalformedPayload { kind: EventKind, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event seq {seq}: {source}")]
pub struct ReplayError {
    pub seq: u64,
    #[source]
    pub source: TransitionError,
}

/// Event kinds that [`apply_event`] accepts from `state`, given a well-formed payload.
pub fn legal_events(state: &TaskState) -> BTreeSet<EventKind> {
    let steps = state.steps.len() as u32;
    EventKind::PHASE_KINDS
        .into_iter()
        .chain((0..steps).flat_map(EventKind::step_kinds))
        .filter(|k| state.permits(*k))
        .collect()
}

#[derive(Deserialize)]
struct PlanShape {
    steps: Vec<ShapeStep>,
}

#[derive(Deserialize)]
struct ShapeStep {
    gated: bool,
}

#[derive(Deserialize)]
struct AssignmentBody {
    role: WorkerRole,
    worker_id: String,
    worker_kind: WorkerKind,
}

#[derive(Deserialize)]
struct OptionalAssignment {
    worker_id: Option<String>,
    worker_kind: Option<WorkerKind>,
}

fn malformed(kind: EventKind, reason: impl fmt::Display) -> TransitionError {
    TransitionError::MalformedPayload {
        kind,
        reason: reason.to_string(),
    }
}

fn optional_assignment(kind: EventKind, payload: &Payload) -> Result<Option<AssignedWorker>, TransitionError> {
    let body: OptionalAssignment = payload.decode().map_err(|e| malformed(kind, e))?;
    Ok(match (body.worker_id, body.worker_kind) {
        (Some(worker_id), Some(kind)) => Some(AssignedWorker { worker_id, kind }),
        (Some(worker_id), None) => Some(AssignedWorker {
            worker_id,
            kind: WorkerKind::Expert,
        }),
        _ => None,
    })
}

/// Apply one event, returning the successor state.
pub fn apply_event(state: &TaskState, event: &AuditEvent) -> Result<TaskState, TransitionError> {
    use EventKind::*;
    let kind = event.kind;
    if state.phase.is_terminal() {
        return Err(TransitionError::TerminalState { phase: state.phase });
    }
    if !state.permits(kind) {
        return Err(TransitionError::IllegalTransition {
            phase: state.phase,
            kind,
        });
    }
    let mut next = state.clone();
    next.version += 1;
    match kind {
        TaskSubmitted => {}
        ClarificationStarted => {
            next.phase = Phase::Clarifying;
            next.clarification_rounds = 1;
        }
        ClarificationRound => next.clarification_rounds += 1,
        PlanningStarted => next.phase = Phase::Planning,
        PlanRecorded => {
            let plan = event
                .payload
                .get("plan")
                .ok_or_else(|| malformed(kind, "missing `plan`"))?;
            let shape: PlanShape =
                serde_json::from_value(plan.clone()).map_err(|e| malformed(kind, e))?;
            if shape.steps.is_empty() {
                return Err(malformed(kind, "plan has no steps"));
            }
            next.steps = shape.steps.iter().map(|s| StepProgress::new(s.gated)).collect();
        }
        RoutingStarted => next.phase = Phase::Routing,
        WorkerAssigned => {
            let body: AssignmentBody = event.payload.decode().map_err(|e| malformed(kind, e))?;
            next.assigned_workers.insert(
                body.role,
                AssignedWorker {
                    worker_id: body.worker_id,
                    kind: body.worker_kind,
                },
            );
        }
        ExecutionStarted => next.phase = Phase::Executing,
        TaskDeclined => next.phase = Phase::Declined,
        GateRequested(i) => next.steps[i as usize].status = StepPhase::AwaitingGate,
        GateApproved(i) => next.steps[i as usize].status = StepPhase::Approved,
        GateRejected(i) => {
            let s = &mut next.steps[i as usize];
            s.status = StepPhase::Pending;
            s.reworks += 1;
        }
        StepStarted(i) => {
            next.steps[i as usize].status = StepPhase::InProgress;
            next.current_step = Some(i);
        }
        StepCompleted(i) => {
            next.steps[i as usize].status = StepPhase::Done;
            next.current_step = None;
        }
        StepEscalated(i) => {
            let target = optional_assignment(kind, &event.payload)?;
            let s = &mut next.steps[i as usize];
            s.escalated = true;
            s.escalated_to = target;
            if s.status == StepPhase::Verified {
                s.status = StepPhase::Done;
            }
        }
        StepSkipped(i) => next.steps[i as usize].status = StepPhase::Skipped,
        OnlineQAStarted(i) => {
            next.phase = Phase::OnlineQA;
            next.current_step = Some(i);
        }
        OnlineQAPassed | OnlineQAFailed => {
            if let Some(i) = next.current_step.take() {
                let s = &mut next.steps[i as usize];
                if kind == OnlineQAPassed {
                    s.status = StepPhase::Verified;
                } else {
                    s.status = StepPhase::Pending;
                    s.reworks += 1;
                }
            }
            next.phase = Phase::Executing;
        }
        OfflineQAStarted => {
            next.phase = Phase::OfflineQA;
            next.current_step = None;
            next.offline_escalated = false;
            next.offline_passes += 1;
        }
        QAPassed => next.phase = Phase::Finalized,
        QAFailedRework => next.phase = Phase::Rework,
        QAEscalatedToHuman => {
            next.offline_escalated = true;
            if let Some(w) = optional_assignment(kind, &event.payload)? {
                next.assigned_workers.insert(WorkerRole::QaReviewer, w);
            }
        }
        StepReopened(i) => {
            let s = &mut next.steps[i as usize];
            s.status = StepPhase::Pending;
            s.reworks += 1;
        }
        ReworkStarted => next.phase = Phase::Executing,
    }
    Ok(next)
}

/// Fold the log from the initial `Submitted` state.
pub fn replay(log: &AuditLog) -> Result<TaskState, ReplayError> {
    replay_from(TaskState::initial(), log)
}

pub fn replay_from(initial: TaskState, log: &AuditLog) -> Result<TaskState, ReplayError> {
    log.events().iter().try_fold(initial, |state, event| {
        apply_event(&state, event).map_err(|source| ReplayError {
            seq: event.seq,
            source,
        })
    })
}
