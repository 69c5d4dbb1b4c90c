//! Independent table model of the task lifecycle, plus a seeded sequence
//! fuzzer that checks the real state machine against it.

#![allow(dead_code)]

use gatework_core::{apply_event, legal_events, replay, Actor, AuditEvent, AuditLog, EventKind, Payload, Phase};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S {
    Pending,
    AwaitingGate,
    Approved,
    InProgress,
    Done,
    Verified,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub gated: bool,
    pub s: S,
    pub escalated: bool,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub phase: Phase,
    pub rounds: u32,
    pub steps: Vec<Step>,
    pub executor: bool,
    pub offline_escalated: bool,
    pub current: Option<u32>,
    pub version: u64,
}

const CAP: u32 = 3;

impl Model {
    pub fn new() -> Self {
        Model {
            phase: Phase::Submitted,
            rounds: 0,
            steps: vec![],
            executor: false,
            offline_escalated: false,
            current: None,
            version: 0,
        }
    }

    fn st(&self, i: u32) -> Option<S> {
        self.steps.get(i as usize).map(|s| s.s)
    }

    fn busy(&self) -> bool {
        self.steps.iter().any(|s| s.s == S::InProgress)
    }
}

/// Phase precondition for each kind. `None` means the kind needs a step check too.
fn phases(k: EventKind) -> &'static [Phase] {
    use EventKind::*;
    use Phase::*;
    match k {
        TaskSubmitted => &[Submitted],
        ClarificationStarted => &[Submitted],
        ClarificationRound | PlanningStarted => &[Clarifying],
        PlanRecorded | RoutingStarted => &[Planning],
        WorkerAssigned => &[Routing, Executing],
        ExecutionStarted => &[Routing],
        TaskDeclined => &[Submitted, Clarifying, Planning, Routing],
        GateRequested(_) | GateApproved(_) | GateRejected(_) | StepStarted(_) | StepCompleted(_)
        | StepEscalated(_) | StepSkipped(_) | OnlineQAStarted(_) => &[Executing],
        OnlineQAPassed | OnlineQAFailed => &[OnlineQA],
        OfflineQAStarted => &[Executing, OnlineQA],
        QAPassed | QAFailedRework | QAEscalatedToHuman => &[OfflineQA],
        StepReopened(_) | ReworkStarted => &[Rework],
    }
}

/// Oracle legality of `k` from `m`, ignoring payload contents.
pub fn legal(m: &Model, k: EventKind) -> bool {
    use EventKind::*;
    if !phases(k).contains(&m.phase) {
        return false;
    }
    match k {
        TaskSubmitted => m.version == 0,
        ClarificationRound => m.rounds < CAP,
        RoutingStarted => !m.steps.is_empty(),
        ExecutionStarted => m.executor,
        GateRequested(i) => m.steps.get(i as usize).is_some_and(|s| s.gated && s.s == S::Pending),
        GateApproved(i) | GateRejected(i) => m.st(i) == Some(S::AwaitingGate),
        StepStarted(i) => {
            !m.busy()
                && m.steps
                    .get(i as usize)
                    .is_some_and(|s| s.s == S::Approved || (s.s == S::Pending && !s.gated))
        }
        StepCompleted(i) => m.st(i) == Some(S::InProgress),
        StepEscalated(i) => m
            .steps
            .get(i as usize)
            .is_some_and(|s| !s.escalated && !matches!(s.s, S::InProgress | S::AwaitingGate | S::Skipped)),
        StepSkipped(i) => m.st(i) == Some(S::Pending),
        OnlineQAStarted(i) => !m.busy() && m.st(i) == Some(S::Done),
        OfflineQAStarted => {
            !m.busy()
                && !m.steps.is_empty()
                && m.steps.iter().all(|s| matches!(s.s, S::Done | S::Verified | S::Skipped))
        }
        QAEscalatedToHuman => !m.offline_escalated,
        StepReopened(i) => matches!(m.st(i), Some(S::Done | S::Verified)),
        ReworkStarted => m.steps.iter().any(|s| s.s == S::Pending),
        _ => true,
    }
}

/// Apply a legal event to the model. `plan` gives the gated flags for PlanRecorded.
pub fn advance(m: &mut Model, k: EventKind, plan: &[bool]) {
    use EventKind::*;
    m.version += 1;
    let set = |m: &mut Model, i: u32, s: S| m.steps[i as usize].s = s;
    match k {
        ClarificationStarted => {
            m.phase = Phase::Clarifying;
            m.rounds = 1;
        }
        ClarificationRound => m.rounds += 1,
        PlanningStarted => m.phase = Phase::Planning,
        PlanRecorded => {
            m.steps = plan
                .iter()
                .map(|g| Step {
                    gated: *g,
                    s: S::Pending,
                    escalated: false,
                })
                .collect()
        }
        RoutingStarted => m.phase = Phase::Routing,
        WorkerAssigned => m.executor = true,
        ExecutionStarted => m.phase = Phase::Executing,
        TaskDeclined => m.phase = Phase::Declined,
        GateRequested(i) => set(m, i, S::AwaitingGate),
        GateApproved(i) => set(m, i, S::Approved),
        GateRejected(i) | StepReopened(i) => set(m, i, S::Pending),
        StepStarted(i) => set(m, i, S::InProgress),
        StepCompleted(i) => set(m, i, S::Done),
        StepEscalated(i) => {
            let s = &mut m.steps[i as usize];
            s.escalated = true;
            if s.s == S::Verified {
                s.s = S::Done;
            }
        }
        StepSkipped(i) => set(m, i, S::Skipped),
        OnlineQAStarted(i) => {
            m.phase = Phase::OnlineQA;
            m.current = Some(i);
        }
        OnlineQAPassed | OnlineQAFailed => {
            if let Some(i) = m.current.take() {
                set(m, i, if k == OnlineQAPassed { S::Verified } else { S::Pending });
            }
            m.phase = Phase::Executing;
        }
        OfflineQAStarted => {
            m.phase = Phase::OfflineQA;
            m.offline_escalated = false;
        }
        QAPassed => m.phase = Phase::Finalized,
        QAFailedRework => m.phase = Phase::Rework,
        QAEscalatedToHuman => m.offline_escalated = true,
        ReworkStarted => m.phase = Phase::Executing,
        TaskSubmitted => {}
    }
}

fn universe(n_steps: u32) -> Vec<EventKind> {
    EventKind::PHASE_KINDS
        .into_iter()
        .chain((0..n_steps + 1).flat_map(EventKind::step_kinds))
        .collect()
}

/// Payload for `k`; `bad` makes it malformed where the kind checks payloads.
fn payload_for(k: EventKind, plan: &[bool], bad: bool, rng: &mut dyn RngCore) -> Payload {
    match k {
        EventKind::PlanRecorded if bad => Payload::from_json(json!({ "plan": { "steps": [] } })),
        EventKind::PlanRecorded => {
            let steps: Vec<_> = plan.iter().map(|g| json!({ "gated": g })).collect();
            Payload::from_json(json!({ "plan": { "steps": steps } }))
        }
        EventKind::WorkerAssigned if bad => Payload::from_json(json!({ "role": "executor" })),
        EventKind::WorkerAssigned => {
            let kind = ["ai", "expert", "qa_expert"][rng.random_range(0..3usize)];
            Payload::from_json(json!({ "role": "executor", "worker_id": "w", "worker_kind": kind }))
        }
        EventKind::StepEscalated(_) if rng.random::<bool>() => {
            Payload::from_json(json!({ "worker_id": "e", "worker_kind": "expert" }))
        }
        _ => Payload::new(),
    }
}

fn payload_checked(k: EventKind) -> bool {
    matches!(k, EventKind::PlanRecorded | EventKind::WorkerAssigned)
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Tally {
    pub sequences: usize,
    pub attempts: usize,
    pub accepted: usize,
    pub illegal_accepted: usize,
    pub legal_rejected: usize,
    pub legal_set_mismatches: usize,
    pub replay_mismatches: usize,
    pub gate_order_violations: usize,
    pub events_after_terminal: usize,
    pub terminal_reached: usize,
}

impl Tally {
    pub fn clean(&self) -> bool {
        self.illegal_accepted == 0
            && self.legal_rejected == 0
            && self.legal_set_mismatches == 0
            && self.replay_mismatches == 0
            && self.gate_order_violations == 0
            && self.events_after_terminal == 0
    }
}

/// Gated steps are approved (since their last reset) whenever they complete.
pub fn gate_order_violations(log: &AuditLog) -> usize {
    let mut gated: Vec<bool> = vec![];
    let mut approved: Vec<bool> = vec![];
    let mut current: Option<u32> = None;
    let mut bad = 0;
    for e in log.events() {
        match e.kind {
            EventKind::PlanRecorded => {
                gated = e.payload.get("plan").unwrap()["steps"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|s| s["gated"].as_bool().unwrap())
                    .collect();
                approved = vec![false; gated.len()];
            }
            EventKind::GateApproved(i) => approved[i as usize] = true,
            EventKind::GateRejected(i) | EventKind::StepReopened(i) => approved[i as usize] = false,
            EventKind::OnlineQAStarted(i) => current = Some(i),
            EventKind::OnlineQAFailed => {
                if let Some(i) = current.take() {
                    approved[i as usize] = false;
                }
            }
            EventKind::StepCompleted(i) if gated[i as usize] && !approved[i as usize] => bad += 1,
            _ => {}
        }
    }
    bad
}

/// Drive one random sequence of `len` attempts against the real machine.
pub fn run_sequence(rng: &mut ChaCha8Rng, len: usize, tally: &mut Tally) {
    let n_plan = rng.random_range(1..=4u32);
    let plan: Vec<bool> = (0..n_plan).map(|_| rng.random::<bool>()).collect();
    let all = universe(n_plan);
    let mut state = gatework_core::TaskState::initial();
    let mut model = Model::new();
    let mut log = AuditLog::new();
    tally.sequences += 1;
    for _ in 0..len {
        let legal_now = legal_events(&state);
        let oracle_set: Vec<EventKind> = all.iter().copied().filter(|k| legal(&model, *k)).collect();
        if legal_now.iter().copied().collect::<Vec<_>>() != {
            let mut v = oracle_set.clone();
            v.sort();
            v
        } {
            tally.legal_set_mismatches += 1;
        }
        let k = if !oracle_set.is_empty() && rng.random::<f64>() < 0.75 {
            oracle_set[rng.random_range(0..oracle_set.len())]
        } else {
            all[rng.random_range(0..all.len())]
        };
        let bad = payload_checked(k) && rng.random::<f64>() < 0.1;
        let payload = payload_for(k, &plan, bad, rng);
        let event = AuditEvent::new(state.version, state.version as i64, Actor::System, k, payload);
        tally.attempts += 1;
        let expect = legal(&model, k) && !bad;
        match apply_event(&state, &event) {
            Ok(next) => {
                tally.accepted += 1;
                if !expect {
                    tally.illegal_accepted += 1;
                    return;
                }
                if state.phase.is_terminal() {
                    tally.events_after_terminal += 1;
                }
                state = next;
                advance(&mut model, k, &plan);
                log.append(event).expect("contiguous");
                if replay(&log).ok().as_ref() != Some(&state) {
                    tally.replay_mismatches += 1;
                }
            }
            Err(_) => {
                if expect {
                    tally.legal_rejected += 1;
                }
            }
        }
        if state.phase.is_terminal() && rng.random::<f64>() < 0.5 {
            break;
        }
    }
    if state.phase.is_terminal() {
        tally.terminal_reached += 1;
    }
    let terminal_at = log.events().iter().position(|e| matches!(e.kind, EventKind::QAPassed | EventKind::TaskDeclined));
    if let Some(p) = terminal_at {
        tally.events_after_terminal += log.len() - p - 1;
    }
    tally.gate_order_violations += gate_order_violations(&log);
}

pub fn run(n: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..n {
        let len = rng.random_range(5..=60);
        run_sequence(&mut rng, len, &mut tally);
    }
    tally
}
