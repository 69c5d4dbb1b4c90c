use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EscalationKind, EscalationReason, Plan, Risk};
use crate::qa::{CheckKind, CheckReport, CheckStatus, Outcome, Verdict, CIT_CONFLICT, SC_PASS};
use crate::task::{Phase, StepPhase, TaskState};
use crate::workers::WorkerKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Reworks allowed per step before the budget is exhausted.
    pub max_rework: u32,
    /// Self-consistency score below which a step escalates.
    pub sc_threshold: f64,
    /// Off in the AI-only regime, where no human can take over.
    pub escalation_enabled: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_rework: 2,
            sc_threshold: SC_PASS,
            escalation_enabled: true,
        }
    }
}

/// The single next move of the plan-act-observe-verify loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Clarify, plan and route; the task has not started executing.
    Intake,
    ExecuteStep { step: u32 },
    RequestGate { step: u32 },
    /// A gate decision is outstanding.
    AwaitGate { step: u32 },
    RunOnlineQA { step: u32 },
    /// Hand a step (or, with `step: None`, the offline review) to a human.
    Escalate { step: Option<u32>, reason: EscalationReason },
    /// Gate budget exhausted and no one left to escalate to.
    SkipStep { step: u32 },
    StartOfflineQA,
    /// Reopen these steps and return to execution.
    Rework { steps: Vec<u32> },
    /// The escalated offline review is outstanding.
    AwaitQaReview,
    Finalize { with_findings: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoopError {
    #[error("task is terminal ({0})")]
    Terminal(Phase),
    #[error("plan has {plan} steps but task tracks {task}")]
    PlanMismatch { plan: usize, task: usize },
}

fn latest_per_kind(reports: &[CheckReport], step: u32) -> Vec<&CheckReport> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<&CheckReport> = reports
        .iter()
        .rev()
        .filter(|r| r.step_index == step && seen.insert(r.check_kind))
        .collect();
    out.reverse();
    out
}

/// (a) the same check kind failed at least twice for the step.
pub fn failed_twice(reports: &[CheckReport], step: u32) -> Option<CheckKind> {
    CheckKind::ORDER.into_iter().find(|k| {
        reports
            .iter()
            .filter(|r| r.step_index == step && r.check_kind == *k && r.status == CheckStatus::Fail)
            .count()
            >= 2
    })
}

/// (b) the most recent self-consistency score for the step is below threshold.
pub fn low_self_consistency(reports: &[CheckReport], step: u32, threshold: f64) -> Option<f64> {
    reports
        .iter()
        .rev()
        .find(|r| r.step_index == step && r.check_kind == CheckKind::SelfConsistency)
        .and_then(|r| r.score)
        .filter(|s| *s < threshold)
}

/// (d) the latest checks for the step report conflicting sources.
pub fn conflicting_sources(reports: &[CheckReport], step: u32) -> bool {
    latest_per_kind(reports, step).iter().any(|r| r.has_code(CIT_CONFLICT))
}

/// Rework budget spent and the step's latest checks (or gate) still failing.
pub fn budget_exhausted(task: &TaskState, reports: &[CheckReport], step: u32, cfg: &LoopConfig) -> bool {
    let Some(s) = task.step(step) else { return false };
    if s.reworks < cfg.max_rework {
        return false;
    }
    s.status == StepPhase::Pending || latest_per_kind(reports, step).iter().any(|r| r.status == CheckStatus::Fail)
}

/// First escalation predicate that holds for `step`, in the fixed order
/// (a) failed twice, (b) low self-consistency, (d) conflicting sources,
/// (c) high risk under an AI worker, then exhausted budget. Only AI-acted,
/// not yet escalated steps can escalate.
pub fn escalation_trigger(
    task: &TaskState,
    plan: &Plan,
    reports: &[CheckReport],
    step: u32,
    cfg: &LoopConfig,
) -> Option<EscalationReason> {
    let progress = task.step(step)?;
    if !cfg.escalation_enabled || progress.escalated || task.acting_kind(step) != WorkerKind::Ai {
        return None;
    }
    if matches!(progress.status, StepPhase::InProgress | StepPhase::AwaitingGate | StepPhase::Skipped) {
        return None;
    }
    if let Some(kind) = failed_twice(reports, step) {
        return Some(EscalationReason::new(EscalationKind::FailedChecks, format!("{kind} failed twice")));
    }
    if let Some(score) = low_self_consistency(reports, step, cfg.sc_threshold) {
        return Some(EscalationReason::new(
            EscalationKind::LowSelfConsistency,
            format!("self-consistency {score:.3} below {}", cfg.sc_threshold),
        ));
    }
    if conflicting_sources(reports, step) {
        return Some(EscalationReason::new(EscalationKind::ConflictingSources, "sources disagree"));
    }
    if plan.step(step).is_some_and(|s| s.risk == Risk::High) {
        return Some(EscalationReason::new(EscalationKind::HighRiskStep, "high-risk step under AI worker"));
    }
    if budget_exhausted(task, reports, step, cfg) {
        return Some(EscalationReason::new(
            EscalationKind::FailedChecks,
            format!("rework budget of {} exhausted", cfg.max_rework),
        ));
    }
    None
}

/// Result of an online QA round for a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineDisposition {
    Passed,
    /// Send the step back for another execution.
    Failed,
    /// Checks failed but the rework budget is spent; accept with findings.
    AcceptedOverBudget,
}

pub fn online_disposition(task: &TaskState, step: u32, reports: &[CheckReport], cfg: &LoopConfig) -> OnlineDisposition {
    let failed = reports.iter().any(|r| r.status == CheckStatus::Fail);
    let reworks = task.step(step).map_or(0, |s| s.reworks);
    match (failed, reworks < cfg.max_rework) {
        (false, _) => OnlineDisposition::Passed,
        (true, true) => OnlineDisposition::Failed,
        (true, false) => OnlineDisposition::AcceptedOverBudget,
    }
}

/// Steps an offline rework should reopen: those named by failing reports that
/// still have budget and are not skipped.
pub fn reopen_targets(task: &TaskState, reports: &[CheckReport], cfg: &LoopConfig) -> Vec<u32> {
    let named: BTreeSet<u32> = reports
        .iter()
        .filter(|r| r.has_material() || r.status == CheckStatus::Fail)
        .map(|r| r.step_index)
        .collect();
    named
        .into_iter()
        .filter(|i| {
            task.step(*i).is_some_and(|s| {
                s.reworks < cfg.max_rework
                    && matches!(s.status, StepPhase::Done | StepPhase::Verified | StepPhase::Pending)
            })
        })
        .collect()
}

fn offline_reason(reports: &[CheckReport]) -> EscalationReason {
    if reports.iter().any(|r| r.has_code(CIT_CONFLICT)) {
        EscalationReason::new(EscalationKind::ConflictingSources, "offline review: conflicting sources")
    } else if reports
        .iter()
        .any(|r| r.check_kind == CheckKind::SelfConsistency && r.status != CheckStatus::Pass)
    {
        EscalationReason::new(EscalationKind::LowSelfConsistency, "offline review: low agreement")
    } else {
        EscalationReason::new(EscalationKind::FailedChecks, "offline review: unresolved checks")
    }
}

/// Decide the next loop action. `reports` holds the online QA history while
/// executing and the current offline pass during offline QA or rework.
pub fn next_action(task: &TaskState, plan: &Plan, reports: &[CheckReport], cfg: &LoopConfig) -> Result<Action, LoopError> {
    if task.is_terminal() {
        return Err(LoopError::Terminal(task.phase));
    }
    if !task.phase.is_pre_execution() && plan.steps.len() != task.steps.len() {
        return Err(LoopError::PlanMismatch {
            plan: plan.steps.len(),
            task: task.steps.len(),
        });
    }
    match task.phase {
        Phase::Submitted | Phase::Clarifying | Phase::Planning | Phase::Routing => Ok(Action::Intake),
        Phase::OnlineQA => Ok(Action::RunOnlineQA {
            step: task.current_step.unwrap_or(0),
        }),
        Phase::Executing => Ok(execution_action(task, plan, reports, cfg)),
        Phase::OfflineQA => Ok(offline_action(task, reports, cfg)),
        Phase::Rework => {
            let mut steps: BTreeSet<u32> = reopen_targets(task, reports, cfg).into_iter().collect();
            steps.extend(
                task.steps
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.status == StepPhase::Pending)
                    .map(|(i, _)| i as u32),
            );
            Ok(Action::Rework {
                steps: steps.into_iter().collect(),
            })
        }
        Phase::Finalized | Phase::Declined => unreachable!("terminal handled above"),
    }
}

fn execution_action(task: &TaskState, plan: &Plan, reports: &[CheckReport], cfg: &LoopConfig) -> Action {
    if let Some(i) = task.steps.iter().position(|s| s.status == StepPhase::InProgress) {
        return Action::ExecuteStep { step: i as u32 };
    }
    for (i, s) in task.steps.iter().enumerate() {
        let step = i as u32;
        match s.status {
            StepPhase::Skipped => continue,
            StepPhase::Verified => {
                if let Some(reason) = escalation_trigger(task, plan, reports, step, cfg) {
                    return Action::Escalate { step: Some(step), reason };
                }
                continue;
            }
            StepPhase::Done => return Action::RunOnlineQA { step },
            StepPhase::AwaitingGate => return Action::AwaitGate { step },
            StepPhase::InProgress => return Action::ExecuteStep { step },
            StepPhase::Approved => {
                if let Some(reason) = escalation_trigger(task, plan, reports, step, cfg) {
                    return Action::Escalate { step: Some(step), reason };
                }
                return Action::ExecuteStep { step };
            }
            StepPhase::Pending => {
                if let Some(reason) = escalation_trigger(task, plan, reports, step, cfg) {
                    return Action::Escalate { step: Some(step), reason };
                }
                if s.gated {
                    if s.reworks > cfg.max_rework {
                        return Action::SkipStep { step };
                    }
                    return Action::RequestGate { step };
                }
                return Action::ExecuteStep { step };
            }
        }
    }
    Action::StartOfflineQA
}

fn offline_action(task: &TaskState, reports: &[CheckReport], cfg: &LoopConfig) -> Action {
    if task.offline_escalated {
        return Action::AwaitQaReview;
    }
    let verdict = Verdict::from_reports(reports.to_vec());
    match verdict.outcome {
        Outcome::Pass => Action::Finalize { with_findings: false },
        Outcome::EscalateHumanQa if cfg.escalation_enabled => Action::Escalate {
            step: None,
            reason: offline_reason(reports),
        },
        Outcome::EscalateHumanQa => Action::Finalize { with_findings: true },
        Outcome::Rework => {
            let steps = reopen_targets(task, reports, cfg);
            if !steps.is_empty() {
                Action::Rework { steps }
            } else if cfg.escalation_enabled {
                Action::Escalate {
                    step: None,
                    reason: EscalationReason::new(EscalationKind::FailedChecks, "offline rework budget exhausted"),
                }
            } else {
                Action::Finalize { with_findings: true }
            }
        }
    }
}
