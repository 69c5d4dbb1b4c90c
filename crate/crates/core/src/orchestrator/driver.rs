//! Stateful driver that turns loop actions into recorded events.
//!
//! Every event goes through [`EventSink::append`] before the in-memory state
//! changes, so a sink that syncs to disk gives write-ahead durability. All
//! step outputs and check reports live in event payloads: the log alone
//! rebuilds a [`TaskRun`].

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{
    decompose, escalate, handle_gate_decision, match_worker, next_action, online_disposition, reopen_targets, Action,
    Decision, GateDecision, GateError, LoopConfig, LoopError, OnlineDisposition, Plan, PlanError, RoutingError,
    RoutingRequest, TemplateLibrary,
};
use crate::audit::{AuditEvent, AuditLog, LogError, Payload};
use crate::deliverable::Deliverable;
use crate::qa::{offline_verify, online_checks, CheckReport, Verdict};
use crate::task::{
    apply_event, replay, Actor, AssignedWorker, EventKind, Phase, ReplayError, StepPhase, TaskBrief, TaskState,
    TransitionError, WorkerRole,
};
use crate::workers::{StepContext, StepOutput, WorkerError, WorkerKind, WorkerProfile};

pub trait Clock {
    fn now_ms(&self) -> i64;
}

/// Clock that always reads the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub i64);

impl Clock for FixedClock {
    fn now_ms(&self) -> i64 {
        self.0
    }
}

pub trait EventSink {
    fn append(&mut self, event: &AuditEvent) -> Result<(), LogError>;
}

/// Sink that keeps nothing; for in-memory runs.
#[derive(Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn append(&mut self, _event: &AuditEvent) -> Result<(), LogError> {
        Ok(())
    }
}

impl EventSink for crate::audit::EventFile {
    fn append(&mut self, event: &AuditEvent) -> Result<(), LogError> {
        crate::audit::EventFile::append(self, event)
    }
}

/// Result of asking someone to do a step.
#[derive(Debug, Clone, PartialEq)]
pub enum Work {
    Done(StepOutput),
    /// A human has not delivered yet.
    Waiting,
}

/// Resolves assigned workers to actual work.
pub trait WorkerDirectory {
    /// `attempt` counts outputs already recorded for this step.
    fn perform(&mut self, worker: &AssignedWorker, ctx: &StepContext<'_>, attempt: u32) -> Result<Work, WorkerError>;
}

#[derive(Debug, Error)]
pub enum DriveError {
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Worker(#[from] WorkerError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("log does not start with a readable TaskSubmitted event")]
    MissingBrief,
    #[error("no offline QA review is pending")]
    NoPendingReview,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "waiting_for", rename_all = "snake_case")]
pub enum Wait {
    Gate { step: u32 },
    QaReview,
    Deliverable { step: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tick {
    Progressed,
    Waiting(Wait),
    Finished(Phase),
}

/// Gate kind used for escalated offline reviews.
pub const OFFLINE_REVIEW_GATE: &str = "offline_qa_review";

/// A decision outstanding for a human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingGate {
    pub gate_id: String,
    pub task_id: String,
    pub step_index: Option<u32>,
    pub gate_kind: String,
    pub description: String,
    pub risk: Option<super::Risk>,
    pub assignee: Option<String>,
    pub requested_at: i64,
    pub requested_seq: u64,
}

/// One task: brief, log, replayed state and plan.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRun {
    pub task_id: String,
    pub brief: TaskBrief,
    pub log: AuditLog,
    pub state: TaskState,
    pub plan: Option<Plan>,
}

impl TaskRun {
    /// Build the submission event without recording it anywhere.
    pub fn submission(task_id: &str, brief: &TaskBrief, now: i64) -> AuditEvent {
        let mut brief = brief.clone();
        brief.task_id = task_id.to_string();
        AuditEvent::new(0, now, Actor::Client, EventKind::TaskSubmitted, Payload::new().with("brief", &brief))
    }

    pub fn submit(task_id: &str, brief: &TaskBrief, now: i64, sink: &mut dyn EventSink) -> Result<TaskRun, DriveError> {
        let event = Self::submission(task_id, brief, now);
        sink.append(&event)?;
        Self::from_log(task_id, AuditLog::from_events(vec![event])?)
    }

    pub fn from_log(task_id: &str, log: AuditLog) -> Result<TaskRun, DriveError> {
        let brief: TaskBrief = log
            .events()
            .first()
            .filter(|e| e.kind == EventKind::TaskSubmitted)
            .and_then(|e| e.payload.field("brief"))
            .ok_or(DriveError::MissingBrief)?;
        let state = replay(&log)?;
        let plan = Plan::from_log(&log).ok();
        Ok(TaskRun {
            task_id: task_id.to_string(),
            brief,
            log,
            state,
            plan,
        })
    }

    /// Validate, persist, then apply one event.
    pub fn commit(&mut self, event: AuditEvent, sink: &mut dyn EventSink) -> Result<(), DriveError> {
        let next = apply_event(&self.state, &event)?;
        sink.append(&event)?;
        if event.kind == EventKind::PlanRecorded {
            self.plan = event.payload.field("plan");
        } else if let Some(plan) = self.plan.as_mut() {
            plan.observe(event.kind, &event.payload);
        }
        self.log.append(event)?;
        self.state = next;
        Ok(())
    }

    pub fn record(
        &mut self,
        sink: &mut dyn EventSink,
        clock: &dyn Clock,
        actor: Actor,
        kind: EventKind,
        payload: Payload,
    ) -> Result<(), DriveError> {
        let last = self.log.last().map_or(i64::MIN, |e| e.wall_time);
        let event = AuditEvent::new(self.state.version, clock.now_ms().max(last), actor, kind, payload);
        self.commit(event, sink)
    }

    /// Online check reports, oldest first.
    pub fn online_reports(&self) -> Vec<CheckReport> {
        self.log
            .events()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::OnlineQAPassed | EventKind::OnlineQAFailed))
            .filter_map(|e| e.payload.field::<Vec<CheckReport>>("reports"))
            .flatten()
            .collect()
    }

    /// Reports of the most recent offline verdict.
    pub fn last_verdict(&self) -> Option<Verdict> {
        self.log
            .events()
            .iter()
            .rev()
            .find(|e| matches!(e.kind, EventKind::QAPassed | EventKind::QAFailedRework | EventKind::QAEscalatedToHuman))
            .and_then(|e| e.payload.field("verdict"))
    }

    /// Outputs recorded for `step`, oldest first.
    pub fn step_outputs(&self, step: u32) -> Vec<Deliverable> {
        self.log
            .events()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::StepCompleted(i) | EventKind::StepEscalated(i) if i == step))
            .filter_map(|e| e.payload.field("deliverable"))
            .collect()
    }

    pub fn step_output(&self, step: u32) -> Option<Deliverable> {
        self.step_outputs(step).pop()
    }

    /// Current outputs of all non-skipped steps folded into one deliverable.
    pub fn assembled(&self) -> Deliverable {
        let parts: Vec<Deliverable> = (0..self.state.steps.len() as u32)
            .filter(|i| self.state.step(*i).is_some_and(|s| s.status != StepPhase::Skipped))
            .filter_map(|i| self.step_output(i))
            .collect();
        Deliverable::assemble(&parts).unwrap_or_else(|| Deliverable::empty(Actor::System, 0))
    }

    /// Notes from the most recent rejection or failed check on `step`.
    fn latest_notes(&self, step: u32) -> Option<String> {
        self.log.events().iter().rev().find_map(|e| match e.kind {
            EventKind::GateRejected(i) if i == step => e.payload.get_str("notes").map(str::to_string),
            _ => None,
        })
    }

    /// Gates and offline reviews waiting for a human, oldest first.
    pub fn pending_gates(&self) -> Vec<PendingGate> {
        let mut out = Vec::new();
        if let Some(plan) = &self.plan {
            for (i, s) in self.state.steps.iter().enumerate() {
                if s.status != StepPhase::AwaitingGate {
                    continue;
                }
                let step = i as u32;
                let req = self
                    .log
                    .events()
                    .iter()
                    .rev()
                    .find(|e| e.kind == EventKind::GateRequested(step));
                let Some(req) = req else { continue };
                let ps = plan.step(step);
                out.push(PendingGate {
                    gate_id: format!("{}:{}:{}", self.task_id, step, req.seq),
                    task_id: self.task_id.clone(),
                    step_index: Some(step),
                    gate_kind: ps.and_then(|p| p.gate_kind.clone()).unwrap_or_else(|| "plan_step_check".into()),
                    description: ps.map(|p| p.description.clone()).unwrap_or_default(),
                    risk: ps.map(|p| p.risk),
                    assignee: req.payload.get_str("assignee").map(str::to_string),
                    requested_at: req.wall_time,
                    requested_seq: req.seq,
                });
            }
        }
        if self.state.phase == Phase::OfflineQA && self.state.offline_escalated {
            if let Some(req) = self.log.events().iter().rev().find(|e| e.kind == EventKind::QAEscalatedToHuman) {
                out.push(PendingGate {
                    gate_id: format!("{}:qa:{}", self.task_id, req.seq),
                    task_id: self.task_id.clone(),
                    step_index: None,
                    gate_kind: OFFLINE_REVIEW_GATE.into(),
                    description: req.payload.get_str("detail").unwrap_or("offline QA review").to_string(),
                    risk: None,
                    assignee: req.payload.get_str("worker_id").map(str::to_string),
                    requested_at: req.wall_time,
                    requested_seq: req.seq,
                });
            }
        }
        out.sort_by_key(|g| (g.requested_at, g.requested_seq));
        out
    }
}

/// Loop configuration plus the static context a task needs.
pub struct Engine<'a> {
    pub templates: &'a TemplateLibrary,
    pub pool: &'a [WorkerProfile],
    pub cfg: LoopConfig,
}

fn assignment_payload(role: WorkerRole, worker_id: &str, kind: WorkerKind) -> Payload {
    Payload::new()
        .with("role", role)
        .with("worker_id", worker_id)
        .with("worker_kind", kind)
}

fn output_payload(out: &StepOutput) -> Payload {
    Payload::new()
        .with("deliverable", &out.deliverable)
        .with("elapsed_h", out.elapsed_h)
        .with("cost_usd", out.cost_usd)
}

impl<'a> Engine<'a> {
    pub fn new(templates: &'a TemplateLibrary, pool: &'a [WorkerProfile], mut cfg: LoopConfig) -> Self {
        // Without any human in the pool escalation can never be routed.
        cfg.escalation_enabled &= pool.iter().any(|w| w.kind.is_human());
        Engine { templates, pool, cfg }
    }

    /// Reports `next_action` should see for the current phase.
    pub fn reports_for(&self, run: &TaskRun) -> Vec<CheckReport> {
        match run.state.phase {
            Phase::OfflineQA => offline_verify(&run.brief, &run.assembled(), &run.log).reports,
            Phase::Rework => run.last_verdict().map(|v| v.reports).unwrap_or_default(),
            _ => run.online_reports(),
        }
    }

    pub fn next(&self, run: &TaskRun) -> Result<Action, DriveError> {
        let empty = Plan {
            steps: Vec::new(),
            created_from: String::new(),
            revision: 0,
        };
        let plan = run.plan.as_ref().unwrap_or(&empty);
        Ok(next_action(&run.state, plan, &self.reports_for(run), &self.cfg)?)
    }

    fn intake(&self, run: &mut TaskRun, sink: &mut dyn EventSink, clock: &dyn Clock) -> Result<Tick, DriveError> {
        let sys = Actor::System;
        match run.state.phase {
            Phase::Submitted => {
                let payload = Payload::new().with("questions", Vec::<String>::new());
                run.record(sink, clock, sys, EventKind::ClarificationStarted, payload)?;
            }
            Phase::Clarifying => {
                let payload = Payload::new().with("acceptance_criteria", &run.brief.acceptance_criteria);
                run.record(sink, clock, sys, EventKind::PlanningStarted, payload)?;
            }
            Phase::Planning if run.plan.is_none() || run.state.steps.is_empty() => match decompose(&run.brief, self.templates) {
                Ok(plan) => run.record(sink, clock, sys, EventKind::PlanRecorded, Payload::new().with("plan", &plan))?,
                Err(e) => {
                    let payload = Payload::new().with("reason", e.to_string());
                    run.record(sink, clock, sys, EventKind::TaskDeclined, payload)?;
                }
            },
            Phase::Planning => run.record(sink, clock, sys, EventKind::RoutingStarted, Payload::new())?,
            Phase::Routing => {
                let plan = run.plan.clone().ok_or(PlanError::NotRecorded)?;
                if !run.state.assigned_workers.contains_key(&WorkerRole::Executor) {
                    let req = RoutingRequest {
                        required_skills: plan.skills(),
                        deadline_hint: None,
                        budget_hint: None,
                        base_hours: plan.steps.iter().map(|s| s.base_hours).sum(),
                    };
                    let ai: Vec<WorkerProfile> = self.pool.iter().filter(|w| !w.kind.is_human()).cloned().collect();
                    let m = match_worker(&req, &ai).or_else(|_| match_worker(&req, self.pool));
                    match m {
                        Ok(m) => {
                            let mut p = assignment_payload(WorkerRole::Executor, &m.worker_id, m.kind);
                            p.insert("time_estimate_h", m.time_estimate);
                            run.record(sink, clock, sys, EventKind::WorkerAssigned, p)?;
                        }
                        Err(e) => {
                            let payload = Payload::new().with("reason", e.to_string());
                            run.record(sink, clock, sys, EventKind::TaskDeclined, payload)?;
                        }
                    }
                    return Ok(Tick::Progressed);
                }
                let gated_skills: std::collections::BTreeSet<String> = plan
                    .steps
                    .iter()
                    .filter(|s| s.gated)
                    .flat_map(|s| s.required_skills.iter().cloned())
                    .collect();
                if !run.state.assigned_workers.contains_key(&WorkerRole::Supervisor) && !gated_skills.is_empty() {
                    let humans: Vec<WorkerProfile> = self.pool.iter().filter(|w| w.kind == WorkerKind::Expert).cloned().collect();
                    let req = RoutingRequest {
                        required_skills: gated_skills,
                        deadline_hint: None,
                        budget_hint: None,
                        base_hours: 1.0,
                    };
                    if let Ok(m) = match_worker(&req, &humans) {
                        let p = assignment_payload(WorkerRole::Supervisor, &m.worker_id, m.kind);
                        run.record(sink, clock, sys, EventKind::WorkerAssigned, p)?;
                        return Ok(Tick::Progressed);
                    }
                }
                run.record(sink, clock, sys, EventKind::ExecutionStarted, Payload::new())?;
            }
            _ => {}
        }
        Ok(Tick::Progressed)
    }

    fn acting_worker(run: &TaskRun, step: u32) -> Option<AssignedWorker> {
        let s = run.state.step(step)?;
        if s.escalated {
            if let Some(w) = &s.escalated_to {
                return Some(w.clone());
            }
        }
        run.state.assigned_workers.get(&WorkerRole::Executor).cloned()
    }

    fn work(
        &self,
        run: &TaskRun,
        dir: &mut dyn WorkerDirectory,
        worker: &AssignedWorker,
        step: u32,
    ) -> Result<Work, DriveError> {
        let plan = run.plan.as_ref().ok_or(PlanError::NotRecorded)?;
        let ps = plan.step(step).ok_or(PlanError::NotRecorded)?;
        let inputs: Vec<Deliverable> = (0..step).filter_map(|i| run.step_output(i)).collect();
        let notes = run.latest_notes(step);
        let ctx = StepContext {
            task_id: &run.task_id,
            step: ps,
            inputs: &inputs,
            notes: notes.as_deref(),
        };
        let attempt = run.step_outputs(step).len() as u32;
        Ok(dir.perform(worker, &ctx, attempt)?)
    }

    /// Perform exactly one action (at most one recorded event).
    pub fn tick(
        &self,
        run: &mut TaskRun,
        dir: &mut dyn WorkerDirectory,
        sink: &mut dyn EventSink,
        clock: &dyn Clock,
    ) -> Result<Tick, DriveError> {
        if run.state.is_terminal() {
            return Ok(Tick::Finished(run.state.phase));
        }
        let action = self.next(run)?;
        match action {
            Action::Intake => return self.intake(run, sink, clock),
            Action::ExecuteStep { step } => {
                let worker = Self::acting_worker(run, step).ok_or(PlanError::NotRecorded)?;
                let actor = Actor::for_worker(worker.kind);
                if run.state.step(step).map(|s| s.status) != Some(StepPhase::InProgress) {
                    let p = Payload::new().with("worker_id", &worker.worker_id);
                    run.record(sink, clock, actor, EventKind::StepStarted(step), p)?;
                    return Ok(Tick::Progressed);
                }
                match self.work(run, dir, &worker, step)? {
                    Work::Done(out) => run.record(sink, clock, actor, EventKind::StepCompleted(step), output_payload(&out))?,
                    Work::Waiting => return Ok(Tick::Waiting(Wait::Deliverable { step })),
                }
            }
            Action::RequestGate { step } => {
                let assignee = run.state.assigned_workers.get(&WorkerRole::Supervisor).map(|w| w.worker_id.clone());
                let kind = run.plan.as_ref().and_then(|p| p.step(step)).and_then(|s| s.gate_kind.clone());
                let p = Payload::new().with("assignee", assignee).with("gate_kind", kind);
                run.record(sink, clock, Actor::System, EventKind::GateRequested(step), p)?;
            }
            Action::AwaitGate { step } => return Ok(Tick::Waiting(Wait::Gate { step })),
            Action::RunOnlineQA { step } => {
                if run.state.phase == Phase::Executing {
                    run.record(sink, clock, Actor::System, EventKind::OnlineQAStarted(step), Payload::new())?;
                    return Ok(Tick::Progressed);
                }
                let output = run.step_output(step).unwrap_or_else(|| Deliverable::empty(Actor::System, step));
                let last = run.state.steps.len() as u32 - 1;
                let reports = if step == last {
                    let assembled = run.assembled();
                    let mut r = online_checks(&output, None, &run.brief.attachments);
                    r.insert(0, crate::qa::check_spec_conformance(&assembled, &run.brief.acceptance_criteria));
                    r[0].step_index = step;
                    r
                } else {
                    online_checks(&output, None, &run.brief.attachments)
                };
                let disposition = online_disposition(&run.state, step, &reports, &self.cfg);
                let kind = match disposition {
                    OnlineDisposition::Failed => EventKind::OnlineQAFailed,
                    _ => EventKind::OnlineQAPassed,
                };
                let p = Payload::new().with("reports", &reports).with("disposition", disposition);
                run.record(sink, clock, Actor::System, kind, p)?;
            }
            Action::Escalate { step: Some(step), reason } => {
                let plan = run.plan.clone().ok_or(PlanError::NotRecorded)?;
                let ps = plan.step(step).ok_or(PlanError::NotRecorded)?;
                let a = escalate(&run.state, ps, reason.clone(), self.pool)?;
                let worker = AssignedWorker {
                    worker_id: a.worker_id.clone(),
                    kind: a.kind,
                };
                let mut p = Payload::new()
                    .with("reason", &reason)
                    .with("worker_id", &a.worker_id)
                    .with("worker_kind", a.kind)
                    .with("time_estimate_h", a.time_estimate);
                let status = run.state.step(step).map(|s| s.status);
                if matches!(status, Some(StepPhase::Done | StepPhase::Verified)) {
                    // The expert repairs the existing output instead of re-running the step.
                    match self.work(run, dir, &worker, step)? {
                        Work::Done(out) => {
                            p.insert("deliverable", &out.deliverable);
                            p.insert("elapsed_h", out.elapsed_h);
                            p.insert("cost_usd", out.cost_usd);
                        }
                        Work::Waiting => return Ok(Tick::Waiting(Wait::Deliverable { step })),
                    }
                }
                run.record(sink, clock, Actor::System, EventKind::StepEscalated(step), p)?;
            }
            Action::Escalate { step: None, reason } => {
                let verdict = offline_verify(&run.brief, &run.assembled(), &run.log);
                let plan = run.plan.clone().ok_or(PlanError::NotRecorded)?;
                let last = plan.steps.last().ok_or(PlanError::Empty)?;
                let mut p = Payload::new().with("verdict", &verdict).with("reason", &reason).with("detail", &reason.detail);
                if let Ok(a) = escalate(&run.state, last, reason, self.pool) {
                    p.insert("worker_id", &a.worker_id);
                    p.insert("worker_kind", a.kind);
                }
                run.record(sink, clock, Actor::System, EventKind::QAEscalatedToHuman, p)?;
            }
            Action::SkipStep { step } => {
                let p = Payload::new().with("reason", "gate budget exhausted");
                run.record(sink, clock, Actor::System, EventKind::StepSkipped(step), p)?;
            }
            Action::StartOfflineQA => {
                run.record(sink, clock, Actor::System, EventKind::OfflineQAStarted, Payload::new())?;
            }
            Action::Rework { steps } => {
                if run.state.phase == Phase::OfflineQA {
                    let verdict = offline_verify(&run.brief, &run.assembled(), &run.log);
                    let p = Payload::new().with("verdict", &verdict).with("reopen", &steps);
                    run.record(sink, clock, Actor::System, EventKind::QAFailedRework, p)?;
                    return Ok(Tick::Progressed);
                }
                let reopen = steps
                    .iter()
                    .copied()
                    .find(|i| run.state.step(*i).is_some_and(|s| s.status != StepPhase::Pending));
                match reopen {
                    Some(i) => run.record(sink, clock, Actor::System, EventKind::StepReopened(i), Payload::new())?,
                    None => run.record(sink, clock, Actor::System, EventKind::ReworkStarted, Payload::new())?,
                }
            }
            Action::AwaitQaReview => return Ok(Tick::Waiting(Wait::QaReview)),
            Action::Finalize { with_findings } => {
                let verdict = offline_verify(&run.brief, &run.assembled(), &run.log);
                let p = Payload::new().with("verdict", &verdict).with("with_findings", with_findings);
                run.record(sink, clock, Actor::System, EventKind::QAPassed, p)?;
            }
        }
        Ok(Tick::Progressed)
    }

    /// Tick until the task waits or finishes, or `max_ticks` is reached.
    pub fn run_until_blocked(
        &self,
        run: &mut TaskRun,
        dir: &mut dyn WorkerDirectory,
        sink: &mut dyn EventSink,
        clock: &dyn Clock,
        max_ticks: usize,
    ) -> Result<Tick, DriveError> {
        let mut last = Tick::Progressed;
        for _ in 0..max_ticks {
            last = self.tick(run, dir, sink, clock)?;
            if last != Tick::Progressed {
                break;
            }
        }
        Ok(last)
    }

    /// Apply an expert's gate decision.
    pub fn decide_gate(&self, run: &mut TaskRun, d: &GateDecision, sink: &mut dyn EventSink) -> Result<(), DriveError> {
        let plan = run.plan.clone().ok_or(PlanError::NotRecorded)?;
        let (_, _, mut event) = handle_gate_decision(&run.state, &plan, d)?;
        if let Some(last) = run.log.last() {
            event.wall_time = event.wall_time.max(last.wall_time);
        }
        run.commit(event, sink)
    }

    /// Resolve an escalated offline review. Approval delivers; rejection
    /// reopens steps with budget left, or delivers with findings when none has.
    pub fn decide_review(
        &self,
        run: &mut TaskRun,
        decision: Decision,
        notes: &str,
        decided_by: &str,
        sink: &mut dyn EventSink,
        clock: &dyn Clock,
    ) -> Result<(), DriveError> {
        if !(run.state.phase == Phase::OfflineQA && run.state.offline_escalated) {
            return Err(DriveError::NoPendingReview);
        }
        let verdict = run.last_verdict();
        let review = Payload::new()
            .with("decision", decision)
            .with("notes", notes)
            .with("decided_by", decided_by)
            .with("verdict", &verdict);
        let actor = Actor::QaExpert;
        if decision == Decision::RejectWithNotes {
            let reports = verdict.map(|v| v.reports).unwrap_or_default();
            let mut steps = reopen_targets(&run.state, &reports, &self.cfg);
            if steps.is_empty() {
                // Reviewer rejected without findings: reopen the last step with budget.
                steps = (0..run.state.steps.len() as u32)
                    .rev()
                    .filter(|i| {
                        run.state
                            .step(*i)
                            .is_some_and(|s| s.reworks < self.cfg.max_rework && s.status != StepPhase::Skipped)
                    })
                    .take(1)
                    .collect();
            }
            if !steps.is_empty() {
                return run.record(sink, clock, actor, EventKind::QAFailedRework, review.with("reopen", &steps));
            }
            return run.record(sink, clock, actor, EventKind::QAPassed, review.with("with_findings", true));
        }
        run.record(sink, clock, actor, EventKind::QAPassed, review.with("with_findings", false))
    }
}

/// Convenience for payload values that may be absent.
pub fn payload_f64(e: &AuditEvent, key: &str) -> f64 {
    e.payload.get(key).and_then(Value::as_f64).unwrap_or(0.0)
}
