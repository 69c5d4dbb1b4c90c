//! Per-task discrete-event loop around the real orchestrator.
//!
//! Each task owns an [`EventQueue`] and a ChaCha20 substream selected by its
//! index, so a task's draws do not depend on which other tasks run or on which
//! driver thread runs it. Work, gate decisions and offline reviews are
//! scheduled on the queue; the orchestrator is ticked until it blocks after
//! every popped event.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

use gatework_core::orchestrator::driver::{Clock, Engine, NullSink, TaskRun, Tick, Wait, Work, WorkerDirectory};
use gatework_core::orchestrator::{handle_gate_decision, Decision, GateDecision, LoopConfig, PlanError};
use gatework_core::workers::{sample_outcome, Outcome, StepContext, StepOutput, WorkerError, WorkerProfile};
use gatework_core::{
    Actor, AssignedWorker, AuditLog, Deliverable, EventKind, Grade, Payload, Phase, Quality, TaskBrief, WorkerKind,
    WorkerRole,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::{Regime, Scenario, SimConfig, ROLE_AI, ROLE_EXPERT, ROLE_FREELANCER, ROLE_QA};
use crate::queue::EventQueue;
use crate::record::SimRecord;
use crate::SimError;

const HOUR_MS: f64 = 3_600_000.0;
const MAX_TICKS: usize = 10_000;
const MAX_EVENTS: usize = 100_000;

/// Task `index`'s generator: ChaCha20 seeded from the run seed, stream `index`.
pub fn task_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn task_id(index: u64) -> String {
    format!("sim-{index:06}")
}

struct VirtualClock(Cell<f64>);

impl Clock for VirtualClock {
    fn now_ms(&self) -> i64 {
        (self.0.get() * HOUR_MS).round() as i64
    }
}

/// Every random quantity a task uses, drawn up front in a fixed order.
#[derive(Debug, Clone, Copy)]
struct Draws {
    u_category: f64,
    /// AI worker (hybrid, ai_only) or freelancer (human_only).
    primary: Outcome,
    /// Hybrid only: the supervising expert's connect time and effort.
    expert: Option<Outcome>,
    /// Hybrid only: QA expert review time.
    qa: Option<Outcome>,
    u_detect: f64,
    u_repair_bad: f64,
    u_repair_mediocre: f64,
}

impl Draws {
    fn sample(cfg: &SimConfig, rng: &mut ChaCha20Rng) -> Result<Draws, SimError> {
        let u_category = rng.random::<f64>();
        let primary_role = if cfg.regime == Regime::HumanOnly { ROLE_FREELANCER } else { ROLE_AI };
        let primary = sample_outcome(cfg.model(primary_role)?, rng);
        let (expert, qa) = if cfg.regime == Regime::Hybrid {
            let e = sample_outcome(cfg.model(ROLE_EXPERT)?, rng);
            let q = sample_outcome(cfg.model(ROLE_QA)?, rng);
            (Some(e), Some(q))
        } else {
            (None, None)
        };
        Ok(Draws {
            u_category,
            primary,
            expert,
            qa,
            u_detect: rng.random(),
            u_repair_bad: rng.random(),
            u_repair_mediocre: rng.random(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum SimEvent {
    Posted,
    Connected,
    WorkReady(WorkKey),
    GateDue(u32),
    ReviewDue,
}

/// (step, attempt, worker id)
type WorkKey = (u32, u32, String);

/// Synthetic workers for one task, answering through the event queue.
struct World<'a> {
    cfg: &'a SimConfig,
    draws: Draws,
    /// Latent quality of the work product.
    quality: Quality,
    touched: bool,
    queue: EventQueue<SimEvent>,
    work: BTreeMap<WorkKey, (StepOutput, bool)>,
    total_base_h: f64,
    hours: BTreeMap<WorkerKind, f64>,
}

impl<'a> World<'a> {
    fn new(cfg: &'a SimConfig, draws: Draws) -> Self {
        // In the hybrid regime an AI refusal leaves the expert with a useless draft.
        let quality = draws.primary.quality.unwrap_or(Quality::Bad);
        World {
            cfg,
            draws,
            quality,
            touched: false,
            queue: EventQueue::new(),
            work: BTreeMap::new(),
            total_base_h: 1.0,
            hours: BTreeMap::new(),
        }
    }

    fn model_role(&self, kind: WorkerKind) -> &'static str {
        match (kind, self.cfg.regime) {
            (WorkerKind::Ai, _) => ROLE_AI,
            (_, Regime::HumanOnly) => ROLE_FREELANCER,
            (WorkerKind::QaExpert, _) => ROLE_QA,
            (WorkerKind::Expert, _) => ROLE_EXPERT,
        }
    }

    /// Whole-task effort of the worker kind, in hours.
    fn effort(&self, kind: WorkerKind) -> f64 {
        match (kind, self.cfg.regime) {
            (WorkerKind::Ai, _) | (_, Regime::HumanOnly) => self.draws.primary.exec_h,
            _ => self.draws.expert.map_or(0.0, |o| o.exec_h),
        }
    }

    fn charge(&mut self, kind: WorkerKind, h: f64) {
        *self.hours.entry(kind).or_insert(0.0) += h;
    }

    /// First human contact with a hybrid task: the two-stage repair.
    fn touch(&mut self) {
        if self.cfg.regime != Regime::Hybrid || self.touched {
            return;
        }
        self.touched = true;
        let h = &self.cfg.hybrid;
        if self.quality == Quality::Bad && self.draws.u_repair_bad < h.repair_bad {
            self.quality = Quality::Mediocre;
        }
        if self.quality == Quality::Mediocre && self.draws.u_repair_mediocre < h.repair_mediocre {
            self.quality = Quality::Good;
        }
    }

    fn deliverable(&self, kind: WorkerKind, step: u32, description: &str) -> Deliverable {
        let mut d = Deliverable::empty(Actor::for_worker(kind), step);
        d.summary = format!("{description} ({:?})", self.quality);
        if kind == WorkerKind::Ai {
            let detected = self.draws.u_detect < self.cfg.hybrid.mediocre_detection;
            let samples: &[&str] = match self.quality {
                Quality::Good => &["a", "a", "a"],
                Quality::Mediocre if detected => &["a", "a", "b"],
                Quality::Mediocre => &["a", "a", "a"],
                Quality::Bad => &["a", "b", "c"],
            };
            d.answer_samples = samples.iter().map(|s| s.to_string()).collect();
        }
        d
    }

    fn price(&self) -> Result<f64, SimError> {
        let mut total = 0.0;
        for (kind, h) in &self.hours {
            total += self.cfg.model(self.model_role(*kind))?.cost_model.cost(*h);
        }
        Ok(total)
    }
}

impl WorkerDirectory for World<'_> {
    fn perform(&mut self, worker: &AssignedWorker, ctx: &StepContext<'_>, attempt: u32) -> Result<Work, WorkerError> {
        let key: WorkKey = (ctx.step.index, attempt, worker.worker_id.clone());
        match self.work.get(&key) {
            Some((_, true)) => return Ok(Work::Done(self.work.remove(&key).expect("present").0)),
            Some((_, false)) => return Ok(Work::Waiting),
            None => {}
        }
        if worker.kind.is_human() {
            self.touch();
        }
        let h = self.effort(worker.kind) * ctx.step.base_hours / self.total_base_h;
        let rate = self
            .cfg
            .model(self.model_role(worker.kind))
            .map_or(0.0, |m| m.cost_model.per_hour_usd);
        let out = StepOutput {
            deliverable: self.deliverable(worker.kind, ctx.step.index, &ctx.step.description),
            elapsed_h: h,
            cost_usd: rate * h,
        };
        self.charge(worker.kind, h);
        self.queue
            .push_after(h, SimEvent::WorkReady(key.clone()))
            .map_err(|e| WorkerError::WorkerUnavailable {
                worker_id: worker.worker_id.clone(),
                reason: e.to_string(),
            })?;
        self.work.insert(key, (out, false));
        Ok(Work::Waiting)
    }
}

/// Worker pool for a regime; every worker covers every skill in the library.
pub fn regime_pool(scenario: &Scenario) -> Vec<WorkerProfile> {
    let skills: BTreeSet<String> = scenario
        .templates
        .categories()
        .filter_map(|c| scenario.templates.get(c))
        .flat_map(|t| t.steps.iter().flat_map(|s| s.skills.iter().cloned()).chain(t.skills.iter().cloned()))
        .collect();
    let skills: Vec<&str> = skills.iter().map(String::as_str).collect();
    let cfg = &scenario.config;
    let rate = |role: &str| cfg.worker_models.get(role).map_or(0.0, |m| m.cost_model.per_hour_usd);
    let mut pool = Vec::new();
    if cfg.regime != Regime::HumanOnly {
        pool.push(WorkerProfile::new("ai-1", WorkerKind::Ai, &skills, rate(ROLE_AI)));
    }
    match cfg.regime {
        Regime::Hybrid => {
            pool.push(WorkerProfile::new("expert-1", WorkerKind::Expert, &skills, rate(ROLE_EXPERT)));
            pool.push(WorkerProfile::new("qa-1", WorkerKind::QaExpert, &skills, rate(ROLE_QA)));
        }
        Regime::HumanOnly => {
            pool.push(WorkerProfile::new("freelancer-1", WorkerKind::Expert, &skills, rate(ROLE_FREELANCER)));
        }
        Regime::AiOnly => {}
    }
    pool
}

fn loop_config(cfg: &SimConfig) -> LoopConfig {
    let mut l = cfg.loop_config;
    // Only the hybrid regime has someone to hand work to.
    l.escalation_enabled &= cfg.regime == Regime::Hybrid;
    l
}

fn pick_brief(scenario: &Scenario, index: u64, u: f64) -> TaskBrief {
    let mix = scenario.config.mix();
    let mut acc = 0.0;
    let mut chosen = mix.last().expect("mix is never empty");
    for c in &mix {
        acc += c.weight;
        if u < acc {
            chosen = c;
            break;
        }
    }
    TaskBrief {
        task_id: task_id(index),
        area: chosen.area,
        category: chosen.category.clone(),
        brief_text: format!("Simulated {} task {index}", chosen.category),
        attachments: Vec::new(),
        acceptance_criteria: Vec::new(),
    }
}

/// Simulate task `index` of the scenario. Returns its record and audit log.
pub fn simulate_task(scenario: &Scenario, index: u64) -> Result<(SimRecord, AuditLog), SimError> {
    let cfg = &scenario.config;
    let mut rng = task_rng(cfg.seed, index);
    let draws = Draws::sample(cfg, &mut rng)?;
    let brief = pick_brief(scenario, index, draws.u_category);
    let pool = regime_pool(scenario);
    let engine = Engine::new(&scenario.templates, &pool, loop_config(cfg));
    let clock = VirtualClock(Cell::new(0.0));
    let mut sink = NullSink;
    let id = task_id(index);
    let mut run = TaskRun::submit(&id, &brief, 0, &mut sink)?;
    let mut world = World::new(cfg, draws);
    world.queue.push(0.0, SimEvent::Posted)?;

    let connector = match cfg.regime {
        Regime::Hybrid => draws.expert.expect("hybrid draws an expert"),
        _ => draws.primary,
    };
    let mut connect_at = 0.0;
    let mut awaiting: Option<Wait> = None;
    let mut events = 0usize;

    loop {
        events += 1;
        if events > MAX_EVENTS {
            return Err(SimError::Stalled(id));
        }
        let (event, now) = world.queue.advance().map_err(|_| SimError::Stalled(id.clone()))?;
        clock.0.set(now);
        match event {
            SimEvent::Posted => {
                while matches!(run.state.phase, Phase::Submitted | Phase::Clarifying | Phase::Planning) {
                    engine.tick(&mut run, &mut world, &mut sink, &clock)?;
                }
                if run.state.is_terminal() {
                    break;
                }
                if let Some(plan) = &run.plan {
                    world.total_base_h = plan.steps.iter().map(|s| s.base_hours).sum::<f64>().max(f64::MIN_POSITIVE);
                }
                connect_at = connector.connect_h;
                world.queue.push(connect_at, SimEvent::Connected)?;
                continue;
            }
            SimEvent::Connected => {
                if connector.declined {
                    let actor = match cfg.regime {
                        Regime::AiOnly => Actor::AiWorker,
                        _ => Actor::Expert,
                    };
                    let p = Payload::new().with("reason", "worker declined the task");
                    run.record(&mut sink, &clock, actor, EventKind::TaskDeclined, p)?;
                    break;
                }
            }
            SimEvent::WorkReady(key) => {
                if let Some(w) = world.work.get_mut(&key) {
                    w.1 = true;
                }
            }
            SimEvent::GateDue(step) => {
                awaiting = None;
                decide_gate(&engine, &mut run, &clock, step, cfg.regime)?;
            }
            SimEvent::ReviewDue => {
                awaiting = None;
                let reviewer = run
                    .state
                    .assigned_workers
                    .get(&WorkerRole::QaReviewer)
                    .map_or("qa-1".to_string(), |w| w.worker_id.clone());
                engine.decide_review(&mut run, Decision::Approve, "", &reviewer, &mut sink, &clock)?;
            }
        }
        match engine.run_until_blocked(&mut run, &mut world, &mut sink, &clock, MAX_TICKS)? {
            Tick::Finished(_) => break,
            Tick::Progressed => return Err(SimError::Stalled(id)),
            Tick::Waiting(w) if awaiting == Some(w) => {}
            Tick::Waiting(w @ Wait::Gate { step }) => {
                awaiting = Some(w);
                let delay = if cfg.regime == Regime::Hybrid {
                    world.touch();
                    let d = world.effort(WorkerKind::Expert) * cfg.hybrid.gate_review_share;
                    world.charge(WorkerKind::Expert, d);
                    d
                } else {
                    0.0
                };
                world.queue.push_after(delay, SimEvent::GateDue(step))?;
            }
            Tick::Waiting(w @ Wait::QaReview) => {
                awaiting = Some(w);
                world.touch();
                let d = draws.qa.map_or(0.0, |o| o.exec_h);
                world.charge(WorkerKind::QaExpert, d);
                world.queue.push_after(d, SimEvent::ReviewDue)?;
            }
            // Scheduled by the directory when the work was requested.
            Tick::Waiting(Wait::Deliverable { .. }) => {}
        }
    }

    let end = world.queue.now();
    let declined = run.state.phase == Phase::Declined;
    let quality = if declined { Grade::Decline } else { world.quality.into() };
    let n_escalations = run
        .log
        .events()
        .iter()
        .filter(|e| matches!(e.kind, EventKind::StepEscalated(_) | EventKind::QAEscalatedToHuman))
        .count() as u32;
    let n_reworks = run.state.steps.iter().map(|s| s.reworks).sum();
    let price = if declined { 0.0 } else { world.price()? };
    let record = SimRecord::new(
        id,
        cfg.regime,
        quality,
        connect_at,
        (end - connect_at).max(0.0),
        price,
        n_escalations,
        n_reworks,
    );
    Ok((record, run.log))
}

fn decide_gate(
    engine: &Engine<'_>,
    run: &mut TaskRun,
    clock: &VirtualClock,
    step: u32,
    regime: Regime,
) -> Result<(), SimError> {
    let supervisor = run.state.assigned_workers.get(&WorkerRole::Supervisor).map(|w| w.worker_id.clone());
    let d = GateDecision {
        step_index: step,
        decision: Decision::Approve,
        notes: String::new(),
        decided_by: supervisor.unwrap_or_else(|| "system".into()),
        decided_at: clock.now_ms(),
        edited_description: None,
    };
    let mut sink = NullSink;
    if regime == Regime::AiOnly {
        // No human in this regime: the system approves its own gates.
        let plan = run.plan.clone().ok_or(PlanError::NotRecorded).map_err(SimError::from_drive)?;
        let (_, _, mut event) = handle_gate_decision(&run.state, &plan, &d).map_err(SimError::from_drive)?;
        event.actor = Actor::System;
        if let Some(last) = run.log.last() {
            event.wall_time = event.wall_time.max(last.wall_time);
        }
        run.commit(event, &mut sink)?;
    } else {
        engine.decide_gate(run, &d, &mut sink)?;
    }
    Ok(())
}

/// All records of a run, in task order, on the calling thread.
pub fn run_simulation(scenario: &Scenario) -> Result<Vec<SimRecord>, SimError> {
    (0..scenario.config.n_tasks)
        .map(|i| simulate_task(scenario, i).map(|(r, _)| r))
        .collect()
}

/// Same records as [`run_simulation`], computed by `drivers` threads that take
/// task indices round-robin.
pub fn run_sharded(scenario: &Scenario, drivers: usize) -> Result<Vec<SimRecord>, SimError> {
    let drivers = drivers.max(1);
    if drivers == 1 {
        return run_simulation(scenario);
    }
    let n = scenario.config.n_tasks;
    let shards: Vec<Result<Vec<(u64, SimRecord)>, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..drivers as u64)
            .map(|d| {
                s.spawn(move || {
                    (d..n)
                        .step_by(drivers)
                        .map(|i| simulate_task(scenario, i).map(|(r, _)| (i, r)))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("driver thread panicked")).collect()
    });
    let mut all = Vec::with_capacity(n as usize);
    for shard in shards {
        all.extend(shard?);
    }
    all.sort_by_key(|(i, _)| *i);
    Ok(all.into_iter().map(|(_, r)| r).collect())
}
