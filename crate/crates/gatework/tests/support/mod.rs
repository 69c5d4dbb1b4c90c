//! Spawns the real binary against a temporary root and talks to it over HTTP.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use serde_json::{json, Value};

pub const BIN: &str = env!("CARGO_BIN_EXE_gatework");

pub fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> PathBuf {
    repo().join("fixtures").join(rel)
}

/// Run the CLI to completion.
pub fn cli(args: &[&str], root: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).current_dir(repo()).env_remove("GATEWORK_ROOT").env("RUST_LOG", "warn");
    if let Some(r) = root {
        cmd.env("GATEWORK_ROOT", r);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub struct Reply {
    pub status: u16,
    pub body: String,
    pub envelope: Value,
}

impl Reply {
    pub fn payload(&self) -> &Value {
        &self.envelope["payload"]
    }

    pub fn code(&self) -> Option<&str> {
        self.envelope["error"]["code"].as_str()
    }
}

pub struct Server {
    pub root: PathBuf,
    pub base: String,
    child: Child,
    agent: ureq::Agent,
}

impl Server {
    pub fn start(root: &Path) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--port", "0", "--root"])
            .arg(root)
            .env_remove("GATEWORK_ROOT")
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("server starts");
        let out = child.stdout.take().expect("stdout piped");
        let mut line = String::new();
        BufReader::new(out).read_line(&mut line).expect("read banner");
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner `{line}`"))
            .to_string();
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        Server {
            root: root.to_path_buf(),
            base,
            child,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// SIGKILL, no shutdown path runs.
    pub fn kill(mut self) {
        self.child.kill().expect("kill");
        self.child.wait().expect("reap");
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
        let mut resp = resp.expect("request completes");
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().expect("body");
        let envelope: Value = serde_json::from_str(&body).unwrap_or_else(|e| panic!("not json ({e}): {body}"));
        let has_payload = envelope.get("payload").is_some();
        let has_error = envelope.get("error").is_some();
        assert!(has_payload != has_error, "envelope needs exactly one of payload/error: {body}");
        assert!(envelope["request_id"].as_str().is_some_and(|s| !s.is_empty()));
        Reply { status, body, envelope }
    }

    pub fn get(&self, path: &str) -> Reply {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    /// GET with a fixed request id, for byte-level comparisons.
    pub fn get_as(&self, path: &str, request_id: &str) -> Reply {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).header("x-request-id", request_id).call())
    }

    pub fn post(&self, path: &str, body: &Value, expert: Option<&str>) -> Reply {
        self.post_raw(path, &body.to_string(), expert)
    }

    pub fn post_raw(&self, path: &str, body: &str, expert: Option<&str>) -> Reply {
        let mut req = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json");
        if let Some(e) = expert {
            req = req.header("x-expert-id", e);
        }
        Self::finish(req.send(body))
    }

    pub fn submit(&self, category: &str, text: &str) -> Value {
        let r = self.post("/tasks", &brief(category, text), None);
        assert_eq!(r.status, 201, "{}", r.body);
        r.payload().clone()
    }

    pub fn gates(&self) -> Vec<Value> {
        self.get("/gates").payload().as_array().cloned().unwrap_or_default()
    }

    pub fn decide(&self, gate_id: &str, decision: &str, notes: &str) -> Reply {
        self.post(
            &format!("/gates/{gate_id}/decision"),
            &json!({ "decision": decision, "notes": notes }),
            Some("expert-1"),
        )
    }

    pub fn upload(&self, task_id: &str, step: u64, summary: &str) -> Reply {
        self.post(
            &format!("/tasks/{task_id}/deliverables"),
            &json!({ "step_index": step, "summary": summary, "answer_samples": [summary, summary, summary], "elapsed_h": 1.0, "cost_usd": 15.0 }),
            Some("expert-1"),
        )
    }

    pub fn task(&self, task_id: &str) -> Value {
        let r = self.get(&format!("/tasks/{task_id}"));
        assert_eq!(r.status, 200, "{}", r.body);
        r.payload().clone()
    }

    /// Every event of a task, following pagination.
    pub fn all_events(&self, task_id: &str) -> Vec<Value> {
        let mut out = Vec::new();
        let mut after: Option<u64> = None;
        loop {
            let q = match after {
                Some(a) => format!("?after_seq={a}&limit=7"),
                None => "?limit=7".to_string(),
            };
            let r = self.get(&format!("/tasks/{task_id}/events{q}"));
            assert_eq!(r.status, 200, "{}", r.body);
            out.extend(r.payload()["events"].as_array().unwrap().iter().cloned());
            match r.payload()["next_after_seq"].as_u64() {
                Some(n) => after = Some(n),
                None => return out,
            }
        }
    }

    /// Approve gates and deliver steps until the task stops needing a human.
    pub fn drive_to_end(&self, task_id: &str) -> Value {
        for _ in 0..50 {
            let t = self.task(task_id);
            if let Some(g) = t["pending_gates"].as_array().and_then(|g| g.first()) {
                let r = self.decide(g["gate_id"].as_str().unwrap(), "approve", "");
                assert_eq!(r.status, 200, "{}", r.body);
                continue;
            }
            match t["waiting"]["waiting_for"].as_str() {
                Some("deliverable") => {
                    let step = t["waiting"]["step"].as_u64().unwrap();
                    let r = self.upload(task_id, step, "Checked 20 contacts against sources");
                    assert_eq!(r.status, 200, "{}", r.body);
                }
                _ => return t,
            }
        }
        panic!("task {task_id} did not settle");
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn brief(category: &str, text: &str) -> Value {
    json!({ "area": "Sales", "category": category, "brief_text": text, "acceptance_criteria": [] })
}

pub const CONTACTS: &str = "Collect Business Contact Data";
