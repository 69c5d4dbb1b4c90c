use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::AuditLog;
use crate::task::{EventKind, TaskBrief};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Risk {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Pending,
    InProgress,
    Done,
    Reworked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: u32,
    pub description: String,
    pub required_skills: BTreeSet<String>,
    pub risk: Risk,
    pub gated: bool,
    pub status: StepStatus,
    pub base_hours: f64,
    /// Open-ended gate kind, e.g. `plan_audit` or `plan_step_check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_kind: Option<String>,
}

impl PlanStep {
    pub fn new(index: u32, description: &str, skills: &[&str], risk: Risk, gated: bool, base_hours: f64) -> Self {
        PlanStep {
            index,
            description: description.to_string(),
            required_skills: skills.iter().map(|s| s.to_string()).collect(),
            risk,
            gated: gated || risk == Risk::High,
            status: StepStatus::Pending,
            base_hours,
            gate_kind: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    /// Content hash of the brief the plan was derived from.
    pub created_from: String,
    pub revision: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no template for category `{0}` and no generic fallback")]
    NoTemplate(String),
    #[error("plan has no steps")]
    Empty,
    #[error("step {position} has index {index}")]
    NonContiguous { position: usize, index: u32 },
    #[error("step {0} is high risk but not gated")]
    UngatedHighRisk(u32),
    #[error("plan not recorded in log")]
    NotRecorded,
    #[error("recorded plan unreadable: {0}")]
    Unreadable(String),
}

impl Plan {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.steps.is_empty() {
            return Err(PlanError::Empty);
        }
        for (position, s) in self.steps.iter().enumerate() {
            if s.index as usize != position {
                return Err(PlanError::NonContiguous { position, index: s.index });
            }
            if s.risk == Risk::High && !s.gated {
                return Err(PlanError::UngatedHighRisk(s.index));
            }
        }
        Ok(())
    }

    pub fn step(&self, index: u32) -> Option<&PlanStep> {
        self.steps.get(index as usize)
    }

    pub fn skills(&self) -> BTreeSet<String> {
        self.steps.iter().flat_map(|s| s.required_skills.iter().cloned()).collect()
    }

    /// Rebuild the plan, including gate edits and step statuses, from a task log.
    pub fn from_log(log: &AuditLog) -> Result<Plan, PlanError> {
        let mut plan: Option<Plan> = None;
        for e in log.events() {
            if e.kind == EventKind::PlanRecorded {
                let value = e.payload.get("plan").ok_or(PlanError::NotRecorded)?;
                let p: Plan = serde_json::from_value(value.clone()).map_err(|err| PlanError::Unreadable(err.to_string()))?;
                plan = Some(p);
                continue;
            }
            if let Some(p) = plan.as_mut() {
                p.observe(e.kind, &e.payload);
            }
        }
        plan.ok_or(PlanError::NotRecorded)
    }

    /// Track the effect of one lifecycle event on step statuses and text.
    pub fn observe(&mut self, kind: EventKind, payload: &crate::audit::Payload) {
        use EventKind::*;
        let Some(i) = kind.step() else { return };
        let Some(step) = self.steps.get_mut(i as usize) else { return };
        match kind {
            StepStarted(_) => step.status = StepStatus::InProgress,
            StepCompleted(_) => step.status = StepStatus::Done,
            GateRejected(_) | StepReopened(_) => {
                step.status = StepStatus::Reworked;
                self.revision += 1;
            }
            GateApproved(_) => {
                if let Some(text) = payload.get_str("edited_description") {
                    step.description = text.to_string();
                    self.revision += 1;
                }
            }
            _ => {}
        }
    }
}

/// One step of a category template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTemplate {
    pub description: String,
    pub skills: BTreeSet<String>,
    pub risk: Risk,
    #[serde(default)]
    pub gated: bool,
    pub base_hours: f64,
    #[serde(default)]
    pub gate_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub category: String,
    /// Skills a plan for this category must cover.
    #[serde(default)]
    pub skills: BTreeSet<String>,
    #[serde(rename = "step")]
    pub steps: Vec<StepTemplate>,
}

pub const GENERIC_CATEGORY: &str = "generic";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateLibrary {
    templates: BTreeMap<String, Template>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("template `{category}`: {reason}")]
    Invalid { category: String, reason: String },
}

#[derive(Deserialize)]
struct LibraryFile {
    #[serde(default, rename = "template")]
    templates: Vec<Template>,
}

impl TemplateLibrary {
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let file: LibraryFile = toml::from_str(text)?;
        Self::from_templates(file.templates)
    }

    pub fn from_templates(templates: Vec<Template>) -> Result<Self, TemplateError> {
        let mut lib = TemplateLibrary::default();
        for t in templates {
            let invalid = |reason: String| TemplateError::Invalid {
                category: t.category.clone(),
                reason,
            };
            if t.steps.is_empty() {
                return Err(invalid("no steps".into()));
            }
            for (i, s) in t.steps.iter().enumerate() {
                if s.risk == Risk::High && !s.gated {
                    return Err(invalid(format!("step {i} is high risk but not gated")));
                }
                if !(s.base_hours.is_finite() && s.base_hours > 0.0) {
                    return Err(invalid(format!("step {i} base_hours must be positive")));
                }
                if s.skills.is_empty() {
                    return Err(invalid(format!("step {i} declares no skills")));
                }
            }
            let covered: BTreeSet<&String> = t.steps.iter().flat_map(|s| s.skills.iter()).collect();
            if let Some(missing) = t.skills.iter().find(|s| !covered.contains(s)) {
                return Err(invalid(format!("declared skill `{missing}` not used by any step")));
            }
            if lib.templates.contains_key(&t.category) {
                return Err(invalid("duplicate category".into()));
            }
            lib.templates.insert(t.category.clone(), t);
        }
        Ok(lib)
    }

    pub fn get(&self, category: &str) -> Option<&Template> {
        self.templates.get(category)
    }

    /// Template for `category`, falling back to `generic`.
    pub fn resolve(&self, category: &str) -> Option<&Template> {
        self.get(category).or_else(|| self.get(GENERIC_CATEGORY))
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Expand the category template into a plan for `brief`.
pub fn decompose(brief: &TaskBrief, templates: &TemplateLibrary) -> Result<Plan, PlanError> {
    let template = templates
        .resolve(&brief.category)
        .ok_or_else(|| PlanError::NoTemplate(brief.category.clone()))?;
    let steps = template
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| PlanStep {
            index: i as u32,
            description: s.description.clone(),
            required_skills: s.skills.clone(),
            risk: s.risk,
            gated: s.gated || s.risk == Risk::High,
            status: StepStatus::Pending,
            base_hours: s.base_hours,
            gate_kind: s.gate_kind.clone(),
        })
        .collect();
    let plan = Plan {
        steps,
        created_from: brief.content_hash(),
        revision: 0,
    };
    plan.validate()?;
    Ok(plan)
}
