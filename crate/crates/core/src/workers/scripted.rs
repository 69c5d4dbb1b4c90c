use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use super::{check_skills, StepContext, StepOutput, Worker, WorkerError, WorkerProfile};

/// Task id used for fixtures that apply to every task.
pub const DEFAULT_TASK: &str = "_default";

/// Deterministic worker that replays recorded outputs keyed by
/// `(task_id, step_index)`. Outputs come from an in-memory table or from a
/// fixture directory laid out as `<task_id>/<step_index>/output.json`.
#[derive(Debug, Clone)]
pub struct ScriptedWorker {
    profile: WorkerProfile,
    table: BTreeMap<(String, u32), StepOutput>,
    dir: Option<PathBuf>,
}

impl ScriptedWorker {
    pub fn new(profile: WorkerProfile) -> Self {
        ScriptedWorker {
            profile,
            table: BTreeMap::new(),
            dir: None,
        }
    }

    pub fn with_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.dir = Some(dir.into());
        self
    }

    pub fn insert(&mut self, task_id: &str, step: u32, output: StepOutput) {
        self.table.insert((task_id.to_string(), step), output);
    }

    fn lookup(&self, task_id: &str, step: u32) -> Result<Option<StepOutput>, String> {
        for key in [task_id, DEFAULT_TASK] {
            if let Some(out) = self.table.get(&(key.to_string(), step)) {
                return Ok(Some(out.clone()));
            }
        }
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        for key in [task_id, DEFAULT_TASK] {
            let path = dir.join(key).join(step.to_string()).join("output.json");
            if path.is_file() {
                let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let out = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                return Ok(Some(out));
            }
        }
        Ok(None)
    }
}

impl Worker for ScriptedWorker {
    fn profile(&self) -> &WorkerProfile {
        &self.profile
    }

    fn perform_step(&mut self, ctx: &StepContext<'_>) -> Result<StepOutput, WorkerError> {
        check_skills(&self.profile, ctx.step)?;
        let unavailable = |reason: String| WorkerError::WorkerUnavailable {
            worker_id: self.profile.worker_id.clone(),
            reason,
        };
        let mut out = self
            .lookup(ctx.task_id, ctx.step.index)
            .map_err(unavailable)?
            .ok_or_else(|| unavailable(format!("no fixture for ({}, {})", ctx.task_id, ctx.step.index)))?;
        out.deliverable.step_index = ctx.step.index;
        Ok(out)
    }
}
