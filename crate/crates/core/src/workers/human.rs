use std::io::{BufRead, Write};

use serde::Serialize;

use super::{check_skills, StepContext, StepOutput, Worker, WorkerError, WorkerProfile};

#[derive(Serialize)]
struct Request<'a> {
    task_id: &'a str,
    step_index: u32,
    description: &'a str,
    required_skills: Vec<&'a str>,
    notes: Option<&'a str>,
}

/// Human worker reached over a line protocol: one JSON request per step is
/// written out, and one JSON [`StepOutput`] line is read back.
pub struct HumanBridge<R, W> {
    profile: WorkerProfile,
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> HumanBridge<R, W> {
    pub fn new(profile: WorkerProfile, input: R, output: W) -> Self {
        HumanBridge { profile, input, output }
    }
}

impl<R: BufRead, W: Write> Worker for HumanBridge<R, W> {
    fn profile(&self) -> &WorkerProfile {
        &self.profile
    }

    fn perform_step(&mut self, ctx: &StepContext<'_>) -> Result<StepOutput, WorkerError> {
        check_skills(&self.profile, ctx.step)?;
        let unavailable = |reason: String| WorkerError::WorkerUnavailable {
            worker_id: self.profile.worker_id.clone(),
            reason,
        };
        let req = Request {
            task_id: ctx.task_id,
            step_index: ctx.step.index,
            description: &ctx.step.description,
            required_skills: ctx.step.required_skills.iter().map(String::as_str).collect(),
            notes: ctx.notes,
        };
        let line = serde_json::to_string(&req).expect("request serializes");
        writeln!(self.output, "{line}")
            .and_then(|_| self.output.flush())
            .map_err(|e| unavailable(e.to_string()))?;
        let mut reply = String::new();
        let n = self.input.read_line(&mut reply).map_err(|e| unavailable(e.to_string()))?;
        if n == 0 {
            return Err(unavailable("console closed".into()));
        }
        let mut out: StepOutput = serde_json::from_str(reply.trim()).map_err(|e| unavailable(e.to_string()))?;
        out.deliverable.step_index = ctx.step.index;
        Ok(out)
    }
}
