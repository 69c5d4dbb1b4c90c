use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    check_spec_conformance, match_citations, modal_count, reconcile_deliverable, self_consistency, CheckKind,
    CheckReport, CheckStatus, ExtractKey, Finding, Location, Span, SC_TOO_FEW, SPEC_STEP_INCOMPLETE,
    SPEC_STEP_SKIPPED,
};
use crate::audit::AuditLog;
use crate::deliverable::{AttachmentRef, Deliverable};
use crate::task::{EventKind, TaskBrief};

/// Confidence required for a passing verdict: any uncertainty escalates.
pub const CONFIDENCE_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Rework,
    EscalateHumanQa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub reports: Vec<CheckReport>,
    pub confidence: f64,
}

impl Verdict {
    pub fn from_reports(reports: Vec<CheckReport>) -> Verdict {
        let uncertain = reports.iter().filter(|r| r.status == CheckStatus::Uncertain).count();
        let confidence = if reports.is_empty() {
            1.0
        } else {
            1.0 - uncertain as f64 / reports.len() as f64
        };
        let material = reports.iter().any(CheckReport::has_material) || reports.iter().any(|r| r.status == CheckStatus::Fail);
        let outcome = if material {
            Outcome::Rework
        } else if uncertain > 0 || confidence < CONFIDENCE_THRESHOLD {
            Outcome::EscalateHumanQa
        } else {
            Outcome::Pass
        };
        Verdict {
            outcome,
            reports,
            confidence,
        }
    }

    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.reports.iter().flat_map(|r| r.findings.iter())
    }
}

/// Steps the history shows as never completed, and steps that were skipped.
fn step_coverage(history: &AuditLog) -> (Vec<u32>, Vec<u32>) {
    let mut n_steps = 0usize;
    let mut done = BTreeSet::new();
    let mut skipped = BTreeSet::new();
    for e in history.events() {
        match e.kind {
            EventKind::PlanRecorded => {
                n_steps = e
                    .payload
                    .get("plan")
                    .and_then(|p| p.get("steps"))
                    .and_then(|s| s.as_array())
                    .map_or(0, Vec::len);
                done.clear();
                skipped.clear();
            }
            EventKind::StepCompleted(i) => {
                done.insert(i);
            }
            EventKind::StepSkipped(i) => {
                skipped.insert(i);
            }
            _ => {}
        }
    }
    let incomplete = (0..n_steps as u32)
        .filter(|i| !done.contains(i) && !skipped.contains(i))
        .collect();
    (incomplete, skipped.into_iter().collect())
}

fn consistency_report(d: &Deliverable, key: ExtractKey) -> CheckReport {
    let mut report = match self_consistency(&d.answer_samples, key) {
        Ok(r) => r,
        Err(e) => {
            let (m, k) = modal_count(&d.answer_samples, key);
            let score = if k == 0 { 0.0 } else { m as f64 / k as f64 };
            let mut r = CheckReport::from_findings(
                CheckKind::SelfConsistency,
                d.step_index,
                vec![Finding::new(SC_TOO_FEW, e.to_string(), None)],
            );
            r.score = Some(score);
            r
        }
    };
    report.step_index = d.step_index;
    report
}

/// Pre-delivery pass: spec conformance, totals, citations, self-consistency,
/// in that order.
pub fn offline_verify(brief: &TaskBrief, deliverable: &Deliverable, history: &AuditLog) -> Verdict {
    let step = deliverable.step_index;
    let mut spec = check_spec_conformance(deliverable, &brief.acceptance_criteria);
    let (incomplete, skipped) = step_coverage(history);
    let mut findings = std::mem::take(&mut spec.findings);
    for i in incomplete {
        findings.push(Finding::new(
            SPEC_STEP_INCOMPLETE,
            format!("step {i} has no completed output"),
            Some(Location::new("", Span::Lines { start: i as usize, end: i as usize })),
        ));
    }
    for i in skipped {
        findings.push(Finding::new(
            SPEC_STEP_SKIPPED,
            format!("step {i} was skipped"),
            Some(Location::new("", Span::Lines { start: i as usize, end: i as usize })),
        ));
    }
    let spec = CheckReport::from_findings(CheckKind::SpecConformance, step, findings);
    let attachments: Vec<AttachmentRef> = brief.attachments.iter().chain(&deliverable.files).cloned().collect();
    let reports = vec![
        spec,
        reconcile_deliverable(deliverable),
        match_citations(deliverable, &attachments, &deliverable.sources),
        consistency_report(deliverable, ExtractKey::default()),
    ];
    Verdict::from_reports(reports)
}

/// Lightweight checks on one step output. Spec conformance runs only when
/// `criteria` is given (the step that completes the deliverable);
/// self-consistency only when redundant samples exist.
pub fn online_checks(
    step_output: &Deliverable,
    criteria: Option<&[String]>,
    attachments: &[AttachmentRef],
) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    if let Some(c) = criteria {
        reports.push(check_spec_conformance(step_output, c));
    }
    reports.push(reconcile_deliverable(step_output));
    let all: Vec<AttachmentRef> = attachments.iter().chain(&step_output.files).cloned().collect();
    reports.push(match_citations(step_output, &all, &step_output.sources));
    if step_output.answer_samples.len() >= 2 {
        reports.push(consistency_report(step_output, ExtractKey::default()));
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deliverable::{Citation, NamedTable, SourceText, TabularData};
    use crate::qa::CIT_FABRICATED;
    use crate::task::Actor;
    use crate::taxonomy::Area;

    fn brief(criteria: &[&str]) -> TaskBrief {
        TaskBrief {
            task_id: "T1".into(),
            area: Area::Analysis,
            category: "Run Exploratory Data Analysis".into(),
            brief_text: "analyse".into(),
            attachments: vec![],
            acceptance_criteria: criteria.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn clean() -> Deliverable {
        let mut d = Deliverable::empty(Actor::AiWorker, 2);
        d.tables.push(NamedTable {
            name: "summary.csv".into(),
            table: TabularData::from_csv("k,v\na,1\nb,2\nTOTAL,3\n"),
        });
        d.sources.push(SourceText { id: "s1".into(), text: "Churn fell to 3%.".into() });
        d.citations.push(Citation { claim_span: "churn fell to 3%".into(), source_ref: "s1".into() });
        d.answer_samples = vec!["3%".into(), "3%".into(), "3%".into()];
        d
    }

    #[test]
    fn all_pass() {
        let v = offline_verify(&brief(&["total_declared"]), &clean(), &AuditLog::new());
        assert_eq!(v.outcome, Outcome::Pass);
        assert_eq!(v.confidence, 1.0);
        let kinds: Vec<_> = v.reports.iter().map(|r| r.check_kind).collect();
        assert_eq!(kinds, CheckKind::ORDER.to_vec());
    }

    #[test]
    fn fabricated_citation_reworks() {
        let mut d = clean();
        d.citations.push(Citation { claim_span: "x".into(), source_ref: "nope".into() });
        let v = offline_verify(&brief(&[]), &d, &AuditLog::new());
        assert_eq!(v.outcome, Outcome::Rework);
        assert!(v.findings().any(|f| f.code == CIT_FABRICATED));
    }

    #[test]
    fn free_text_escalates() {
        let v = offline_verify(&brief(&["looks professional"]), &clean(), &AuditLog::new());
        assert_eq!(v.outcome, Outcome::EscalateHumanQa);
        assert_eq!(v.confidence, 0.75);
    }

    #[test]
    fn missing_samples_escalate() {
        let mut d = clean();
        d.answer_samples.clear();
        let v = offline_verify(&brief(&[]), &d, &AuditLog::new());
        assert_eq!(v.outcome, Outcome::EscalateHumanQa);
        assert!(v.reports.iter().all(CheckReport::is_well_formed));
    }
}
