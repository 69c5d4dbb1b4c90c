//! File-backed task store.
//!
//! Each task is an append-only event file under `tasks/`. Uploaded human
//! deliverables sit next to it in `tasks/<id>/deliverables/`. The in-memory
//! index is rebuilt from those files at startup; every mutation is written and
//! synced before the call returns.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use gatework_core::orchestrator::driver::{
    Clock, DriveError, Engine, PendingGate, TaskRun, Tick, Wait, Work, WorkerDirectory,
};
use gatework_core::orchestrator::{Decision, GateDecision, GateError, LoopConfig, Plan, TemplateLibrary};
use gatework_core::workers::{load_pool, ScriptedWorker, DEFAULT_TASK, StepContext, StepOutput, Worker, WorkerError, WorkerProfile};
use gatework_core::{
    sha256_hex, Actor, AssignedWorker, AttachmentRef, AuditEvent, Citation, Deliverable, EventFile, EventKind,
    LogError, NamedTable, Phase, SourceText, TaskBrief, TaskState,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUILTIN_TEMPLATES: &str = include_str!("../../../config/templates.toml");
pub const BUILTIN_WORKERS: &str = include_str!("../../../config/workers.toml");

/// Upper bound on driver ticks per request.
const MAX_TICKS: usize = 10_000;
const RECENT_EVENTS: usize = 20;
pub const MAX_PAGE: usize = 1_000;
const ID_PREFIX: &str = "task-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApiError {
    #[error("{0}")]
    ValidationFailed(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    NoPendingGate(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::ValidationFailed(_) => "ValidationFailed",
            ApiError::NotFound(_) => "NotFound",
            ApiError::Conflict(_) => "Conflict",
            ApiError::NoPendingGate(_) => "NoPendingGate",
            ApiError::Internal(_) => "Internal",
        }
    }
}

impl From<DriveError> for ApiError {
    fn from(e: DriveError) -> Self {
        match e {
            DriveError::Gate(GateError::InvalidDecision(m)) => ApiError::ValidationFailed(m),
            DriveError::Gate(g @ GateError::NoPendingGate(_)) => ApiError::NoPendingGate(g.to_string()),
            DriveError::NoPendingReview => ApiError::NoPendingGate(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<LogError> for ApiError {
    fn from(e: LogError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("task {task_id}: {message}")]
    Task { task_id: String, message: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> StoreError + '_ {
    move |e| StoreError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Host wall clock in milliseconds since the Unix epoch.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
    }
}

/// Directory layout under the store root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn tasks(&self) -> PathBuf {
        self.root.join("tasks")
    }

    pub fn events(&self, task_id: &str) -> PathBuf {
        EventFile::path_for(&self.tasks(), task_id)
    }

    pub fn deliverables(&self, task_id: &str) -> PathBuf {
        self.tasks().join(task_id).join("deliverables")
    }

    pub fn deliverable(&self, task_id: &str, step: u32, attempt: u32) -> PathBuf {
        self.deliverables(task_id).join(format!("{step}-{attempt}.json"))
    }

    pub fn datasets(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn runs(&self) -> PathBuf {
        self.root.join("runs")
    }

    /// Fixture outputs for the scripted AI worker.
    pub fn scripts(&self) -> PathBuf {
        self.root.join("scripts")
    }
}

/// Templates, worker pool and loop settings the service runs with.
#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub templates: TemplateLibrary,
    pub pool: Vec<WorkerProfile>,
    pub loop_config: LoopConfig,
}

impl StoreConfig {
    pub fn from_texts(templates: &str, workers: &str) -> Result<Self, StoreError> {
        let templates = TemplateLibrary::from_toml(templates).map_err(|e| StoreError::Config(e.to_string()))?;
        let pool = load_pool(workers).map_err(|e| StoreError::Config(e.to_string()))?;
        if pool.workers.is_empty() {
            return Err(StoreError::Config("worker pool is empty".into()));
        }
        Ok(StoreConfig {
            templates,
            pool: pool.workers,
            loop_config: LoopConfig::default(),
        })
    }

    pub fn builtin() -> Self {
        Self::from_texts(BUILTIN_TEMPLATES, BUILTIN_WORKERS).expect("built-in config is valid")
    }
}

/// Everything a client sees about one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub state: TaskState,
    pub plan: Option<Plan>,
    pub waiting: Option<Wait>,
    pub pending_gates: Vec<PendingGate>,
    pub recent_events: Vec<AuditEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub phase: Phase,
    pub version: u64,
    pub waiting: Option<Wait>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    pub task_id: String,
    pub events: Vec<AuditEvent>,
    /// Pass as `after_seq` to fetch the next page; absent on the last page.
    pub next_after_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreStats {
    pub tasks: usize,
    pub events: usize,
    pub by_phase: BTreeMap<Phase, usize>,
    pub pending_gates: usize,
    pub waiting_deliverables: usize,
    /// Digest of every task's id and serialized state, in id order.
    pub state_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub decision: Decision,
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub edited_description: Option<String>,
    /// Task version the client saw; a mismatch is a conflict.
    #[serde(default)]
    pub expected_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliverableUpload {
    pub step_index: u32,
    pub summary: String,
    #[serde(default)]
    pub files: Vec<AttachmentRef>,
    #[serde(default)]
    pub tables: Vec<NamedTable>,
    #[serde(default)]
    pub citations: Vec<Citation>,
    #[serde(default)]
    pub sources: Vec<SourceText>,
    #[serde(default)]
    pub answer_samples: Vec<String>,
    #[serde(default)]
    pub elapsed_h: f64,
    #[serde(default)]
    pub cost_usd: f64,
    #[serde(default)]
    pub expected_version: Option<u64>,
}

struct Slot {
    run: TaskRun,
    file: EventFile,
    wait: Option<Wait>,
}

/// Resolves workers for one task: humans deliver through uploaded files, the
/// AI worker through scripted fixtures or a placeholder draft.
struct ServiceWorkers<'a> {
    layout: &'a Layout,
    pool: &'a [WorkerProfile],
}

impl ServiceWorkers<'_> {
    fn has_script(&self, task_id: &str, step: u32) -> bool {
        [task_id, DEFAULT_TASK]
            .iter()
            .any(|k| self.layout.scripts().join(k).join(step.to_string()).join("output.json").is_file())
    }
}

impl WorkerDirectory for ServiceWorkers<'_> {
    fn perform(&mut self, worker: &AssignedWorker, ctx: &StepContext<'_>, attempt: u32) -> Result<Work, WorkerError> {
        if worker.kind.is_human() {
            let path = self.layout.deliverable(ctx.task_id, ctx.step.index, attempt);
            if !path.is_file() {
                return Ok(Work::Waiting);
            }
            let unavailable = |reason: String| WorkerError::WorkerUnavailable {
                worker_id: worker.worker_id.clone(),
                reason,
            };
            let text = fs::read_to_string(&path).map_err(|e| unavailable(e.to_string()))?;
            let out: StepOutput = serde_json::from_str(&text).map_err(|e| unavailable(e.to_string()))?;
            return Ok(Work::Done(out));
        }
        let profile = self
            .pool
            .iter()
            .find(|w| w.worker_id == worker.worker_id)
            .cloned()
            .unwrap_or_else(|| WorkerProfile::new(&worker.worker_id, worker.kind, &[], 0.0));
        if self.has_script(ctx.task_id, ctx.step.index) {
            let mut scripted = ScriptedWorker::new(profile).with_dir(self.layout.scripts());
            return scripted.perform_step(ctx).map(Work::Done);
        }
        let mut d = Deliverable::empty(Actor::for_worker(worker.kind), ctx.step.index);
        d.summary = format!("Draft for step {}: {}", ctx.step.index, ctx.step.description);
        d.answer_samples = vec![d.summary.clone(); 3];
        let elapsed_h = ctx.step.base_hours / profile.speed_factor;
        Ok(Work::Done(StepOutput {
            deliverable: d,
            elapsed_h,
            cost_usd: elapsed_h * profile.cost_rate,
        }))
    }
}

/// Write `bytes` to `path` so that the file is either absent or complete.
fn write_durable(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    File::open(dir)?.sync_all()
}

fn parse_gate_id(gate_id: &str) -> Option<(&str, Option<u32>, u64)> {
    let mut parts = gate_id.split(':');
    let (task, step, seq) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || task.is_empty() {
        return None;
    }
    let step = if step == "qa" { None } else { Some(step.parse().ok()?) };
    Some((task, step, seq.parse().ok()?))
}

pub struct Store {
    layout: Layout,
    config: StoreConfig,
    clock: Arc<dyn Clock + Send + Sync>,
    tasks: RwLock<BTreeMap<String, Arc<Mutex<Slot>>>>,
    next_id: AtomicU64,
}

impl Store {
    /// Open (or create) a store and resume every unfinished task.
    pub fn open(root: impl Into<PathBuf>, config: StoreConfig, clock: Arc<dyn Clock + Send + Sync>) -> Result<Store, StoreError> {
        let layout = Layout::new(root);
        for dir in [layout.tasks(), layout.datasets(), layout.runs()] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let store = Store {
            layout,
            config,
            clock,
            tasks: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        };
        let tasks_dir = store.layout.tasks();
        let mut paths: Vec<PathBuf> = fs::read_dir(&tasks_dir)
            .map_err(io_err(&tasks_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "events"))
            .collect();
        paths.sort();
        let mut max_id = 0;
        let mut index = BTreeMap::new();
        for path in paths {
            let task_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let fail = |message: String| StoreError::Task {
                task_id: task_id.clone(),
                message,
            };
            let (file, log) = EventFile::open(&path).map_err(|e| fail(e.to_string()))?;
            if log.is_empty() {
                // Crashed between creating the file and writing the submission.
                drop(file);
                fs::remove_file(&path).map_err(io_err(&path))?;
                continue;
            }
            let run = TaskRun::from_log(&task_id, log).map_err(|e| fail(e.to_string()))?;
            let mut slot = Slot { run, file, wait: None };
            store.drive(&mut slot).map_err(|e| fail(e.to_string()))?;
            if let Some(n) = task_id.strip_prefix(ID_PREFIX).and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            index.insert(task_id, Arc::new(Mutex::new(slot)));
        }
        store.next_id.store(max_id + 1, Ordering::SeqCst);
        *store.tasks.write().expect("index lock") = index;
        Ok(store)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn engine(&self) -> Engine<'_> {
        Engine::new(&self.config.templates, &self.config.pool, self.config.loop_config)
    }

    /// Run the task until it waits for a human or finishes.
    fn drive(&self, slot: &mut Slot) -> Result<(), ApiError> {
        let mut dir = ServiceWorkers {
            layout: &self.layout,
            pool: &self.config.pool,
        };
        let clock: &dyn Clock = &*self.clock;
        let tick = self.engine().run_until_blocked(&mut slot.run, &mut dir, &mut slot.file, clock, MAX_TICKS)?;
        slot.wait = match tick {
            Tick::Waiting(w) => Some(w),
            Tick::Finished(_) => None,
            Tick::Progressed => {
                tracing::warn!(task_id = %slot.run.task_id, "tick budget exhausted");
                None
            }
        };
        Ok(())
    }

    fn slot(&self, task_id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        self.tasks
            .read()
            .expect("index lock")
            .get(task_id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no task `{task_id}`")))
    }

    fn slots(&self) -> Vec<(String, Arc<Mutex<Slot>>)> {
        self.tasks
            .read()
            .expect("index lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    fn lock(slot: &Mutex<Slot>) -> MutexGuard<'_, Slot> {
        slot.lock().expect("task lock")
    }

    fn view(slot: &Slot) -> TaskView {
        let events = slot.run.log.events();
        TaskView {
            task_id: slot.run.task_id.clone(),
            state: slot.run.state.clone(),
            plan: slot.run.plan.clone(),
            waiting: slot.wait,
            pending_gates: slot.run.pending_gates(),
            recent_events: events[events.len().saturating_sub(RECENT_EVENTS)..].to_vec(),
        }
    }

    /// Persist a new task and drive it until it first needs a human.
    pub fn submit(&self, brief: TaskBrief) -> Result<TaskView, ApiError> {
        brief.validate().map_err(|e| ApiError::ValidationFailed(e.to_string()))?;
        let (task_id, path) = loop {
            let n = self.next_id.fetch_add(1, Ordering::SeqCst);
            let id = format!("{ID_PREFIX}{n:06}");
            let path = self.layout.events(&id);
            if !path.exists() {
                break (id, path);
            }
        };
        let (mut file, _) = EventFile::open(&path)?;
        let run = TaskRun::submit(&task_id, &brief, self.clock.now_ms(), &mut file)?;
        let mut slot = Slot { run, file, wait: None };
        self.drive(&mut slot)?;
        let view = Self::view(&slot);
        self.tasks
            .write()
            .expect("index lock")
            .insert(task_id, Arc::new(Mutex::new(slot)));
        Ok(view)
    }

    pub fn get(&self, task_id: &str) -> Result<TaskView, ApiError> {
        let slot = self.slot(task_id)?;
        let guard = Self::lock(&slot);
        Ok(Self::view(&guard))
    }

    pub fn list(&self) -> Vec<TaskSummary> {
        self.slots()
            .into_iter()
            .map(|(id, slot)| {
                let s = Self::lock(&slot);
                TaskSummary {
                    task_id: id,
                    phase: s.run.state.phase,
                    version: s.run.state.version,
                    waiting: s.wait,
                }
            })
            .collect()
    }

    /// Events with `seq > after_seq`, at most `limit` (capped at [`MAX_PAGE`]).
    pub fn events(&self, task_id: &str, after_seq: Option<u64>, limit: usize) -> Result<EventPage, ApiError> {
        if limit == 0 {
            return Err(ApiError::ValidationFailed("limit must be positive".into()));
        }
        let slot = self.slot(task_id)?;
        let s = Self::lock(&slot);
        let limit = limit.min(MAX_PAGE);
        let events = s.run.log.after(after_seq, limit).to_vec();
        let last = s.run.log.last().map(|e| e.seq);
        let next_after_seq = events.last().map(|e| e.seq).filter(|seq| Some(*seq) != last);
        Ok(EventPage {
            task_id: task_id.to_string(),
            events,
            next_after_seq,
        })
    }

    /// Pending gates across all tasks, oldest first.
    pub fn gates(&self, assignee: Option<&str>) -> Vec<PendingGate> {
        let mut out: Vec<PendingGate> = self
            .slots()
            .into_iter()
            .flat_map(|(_, slot)| Self::lock(&slot).run.pending_gates())
            .filter(|g| assignee.is_none() || g.assignee.as_deref() == assignee)
            .collect();
        out.sort_by(|a, b| {
            (a.requested_at, &a.task_id, a.requested_seq).cmp(&(b.requested_at, &b.task_id, b.requested_seq))
        });
        out
    }

    /// Apply a decision to a pending gate or escalated review. Of two racing
    /// decisions on one gate the first to take the task lock wins; the other
    /// sees the gate gone and gets `Conflict`.
    pub fn decide(&self, gate_id: &str, req: DecisionRequest, decided_by: &str) -> Result<TaskView, ApiError> {
        let (task_id, step, seq) =
            parse_gate_id(gate_id).ok_or_else(|| ApiError::NoPendingGate(format!("malformed gate id `{gate_id}`")))?;
        if decided_by.trim().is_empty() {
            return Err(ApiError::ValidationFailed("decided_by is empty".into()));
        }
        let slot = self.slot(task_id)?;
        let mut guard = Self::lock(&slot);
        let s = &mut *guard;
        if !s.run.pending_gates().iter().any(|g| g.gate_id == gate_id) {
            let requested = s.run.log.events().get(seq as usize).is_some_and(|e| match step {
                Some(i) => e.kind == EventKind::GateRequested(i),
                None => e.kind == EventKind::QAEscalatedToHuman,
            });
            return Err(if requested {
                ApiError::Conflict(format!("gate `{gate_id}` was already decided"))
            } else {
                ApiError::NoPendingGate(format!("no pending gate `{gate_id}`"))
            });
        }
        if let Some(v) = req.expected_version {
            if v != s.run.state.version {
                return Err(ApiError::Conflict(format!(
                    "task `{task_id}` is at version {}, request expected {v}",
                    s.run.state.version
                )));
            }
        }
        if req.decision == Decision::RejectWithNotes && req.notes.trim().is_empty() {
            return Err(ApiError::ValidationFailed("a rejection needs notes".into()));
        }
        let engine = self.engine();
        let clock: &dyn Clock = &*self.clock;
        match step {
            Some(step_index) => {
                let d = GateDecision {
                    step_index,
                    decision: req.decision,
                    notes: req.notes,
                    decided_by: decided_by.to_string(),
                    decided_at: clock.now_ms(),
                    edited_description: req.edited_description,
                };
                engine.decide_gate(&mut s.run, &d, &mut s.file)?;
            }
            None => engine.decide_review(&mut s.run, req.decision, &req.notes, decided_by, &mut s.file, clock)?,
        }
        self.drive(s)?;
        Ok(Self::view(s))
    }

    /// Record a human's output for the step the task is waiting on.
    pub fn upload(&self, task_id: &str, up: DeliverableUpload) -> Result<TaskView, ApiError> {
        let slot = self.slot(task_id)?;
        let mut guard = Self::lock(&slot);
        let s = &mut *guard;
        let step = up.step_index;
        if s.wait != Some(Wait::Deliverable { step }) {
            return Err(ApiError::Conflict(format!("task `{task_id}` is not waiting for a deliverable on step {step}")));
        }
        if let Some(v) = up.expected_version {
            if v != s.run.state.version {
                return Err(ApiError::Conflict(format!(
                    "task `{task_id}` is at version {}, request expected {v}",
                    s.run.state.version
                )));
            }
        }
        if up.summary.trim().is_empty() && up.files.is_empty() && up.tables.is_empty() {
            return Err(ApiError::ValidationFailed("deliverable is empty".into()));
        }
        if !(up.elapsed_h.is_finite() && up.elapsed_h >= 0.0 && up.cost_usd.is_finite() && up.cost_usd >= 0.0) {
            return Err(ApiError::ValidationFailed("elapsed_h and cost_usd must be non-negative".into()));
        }
        let attempt = s.run.step_outputs(step).len() as u32;
        let out = StepOutput {
            deliverable: Deliverable {
                files: up.files,
                summary: up.summary,
                citations: up.citations,
                produced_by: Actor::for_worker(s.run.state.acting_kind(step)),
                step_index: step,
                tables: up.tables,
                answer_samples: up.answer_samples,
                sources: up.sources,
            },
            elapsed_h: up.elapsed_h,
            cost_usd: up.cost_usd,
        };
        let path = self.layout.deliverable(task_id, step, attempt);
        let bytes = serde_json::to_vec_pretty(&out).expect("output serializes");
        write_durable(&path, &bytes).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        self.drive(s)?;
        Ok(Self::view(s))
    }

    pub fn stats(&self) -> StoreStats {
        let mut stats = StoreStats {
            tasks: 0,
            events: 0,
            by_phase: BTreeMap::new(),
            pending_gates: 0,
            waiting_deliverables: 0,
            state_hash: String::new(),
        };
        let mut digest_input = String::new();
        for (id, slot) in self.slots() {
            let s = Self::lock(&slot);
            stats.tasks += 1;
            stats.events += s.run.log.len();
            *stats.by_phase.entry(s.run.state.phase).or_default() += 1;
            stats.pending_gates += s.run.pending_gates().len();
            stats.waiting_deliverables += matches!(s.wait, Some(Wait::Deliverable { .. })) as usize;
            digest_input.push_str(&id);
            digest_input.push('\n');
            digest_input.push_str(&serde_json::to_string(&s.run.state).expect("state serializes"));
            digest_input.push('\n');
        }
        stats.state_hash = sha256_hex(digest_input.as_bytes());
        stats
    }
}
