//! Online and offline QA detectors.
//!
//! Every check returns a [`CheckReport`]; detectors never panic or error on
//! bad deliverables, they report findings. Finding codes are listed in
//! [`REGISTRY`] and documented in `docs/qa-codes.md`.

mod citations;
mod consistency;
pub mod corpus;
mod offline;
mod spec;
mod totals;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use citations::{match_citations, normalize_text};
pub use consistency::{modal_count, self_consistency, ExtractKey, TooFewSamples, DEFAULT_K};
pub use offline::{offline_verify, online_checks, Outcome, Verdict, CONFIDENCE_THRESHOLD};
pub use spec::{check_spec_conformance, Criterion};
pub use totals::{reconcile_deliverable, reconcile_totals, MalformedTable};

/// Self-consistency score at or above which a step passes.
pub const SC_PASS: f64 = 0.7;
/// Self-consistency score at or above which a step is uncertain rather than failed.
pub const SC_UNCERTAIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    SpecConformance,
    UnitTotalReconciliation,
    CitationMatch,
    SelfConsistency,
}

impl CheckKind {
    pub const ORDER: [CheckKind; 4] = [
        CheckKind::SpecConformance,
        CheckKind::UnitTotalReconciliation,
        CheckKind::CitationMatch,
        CheckKind::SelfConsistency,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Minor,
    Material,
}

/// Where in a deliverable a finding points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case")]
pub enum Span {
    /// Zero-based data row (header excluded) and column.
    Cell { row: usize, column: usize },
    Lines { start: usize, end: usize },
    Citation { index: usize },
    Criterion { index: usize },
    Sample { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub span: Span,
}

impl Location {
    pub fn new(file: impl Into<String>, span: Span) -> Self {
        Location { file: file.into(), span }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    pub severity: Severity,
    /// Signed difference declared minus computed, for total mismatches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<f64>,
}

impl Finding {
    /// Finding with the registry severity of `code`.
    pub fn new(code: &str, message: impl Into<String>, location: Option<Location>) -> Self {
        let severity = lookup(code).map(|c| c.severity).unwrap_or(Severity::Material);
        Finding {
            code: code.to_string(),
            message: message.into(),
            location,
            severity,
            discrepancy: None,
        }
    }

    pub fn is_material(&self) -> bool {
        self.severity == Severity::Material
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_kind: CheckKind,
    pub step_index: u32,
    pub status: CheckStatus,
    pub findings: Vec<Finding>,
    /// Present exactly for self-consistency reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl CheckReport {
    /// Status from findings: any material finding fails, any minor one is uncertain.
    pub fn from_findings(check_kind: CheckKind, step_index: u32, findings: Vec<Finding>) -> Self {
        let status = if findings.iter().any(Finding::is_material) {
            CheckStatus::Fail
        } else if findings.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::Uncertain
        };
        CheckReport {
            check_kind,
            step_index,
            status,
            findings,
            score: None,
        }
    }

    pub fn has_material(&self) -> bool {
        self.findings.iter().any(Finding::is_material)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    /// Status=fail carries a finding; score exactly on self-consistency reports.
    pub fn is_well_formed(&self) -> bool {
        (self.status != CheckStatus::Fail || !self.findings.is_empty())
            && (self.score.is_some() == (self.check_kind == CheckKind::SelfConsistency))
            && self.score.map_or(true, |s| (0.0..=1.0).contains(&s))
            && self.findings.iter().all(|f| lookup(&f.code).is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Code {
    pub code: &'static str,
    pub check: CheckKind,
    pub severity: Severity,
    pub summary: &'static str,
}

const fn code(code: &'static str, check: CheckKind, severity: Severity, summary: &'static str) -> Code {
    Code { code, check, severity, summary }
}

pub const SPEC_MISSING_FILE: &str = "SPEC-001";
pub const SPEC_ROW_COUNT: &str = "SPEC-002";
pub const SPEC_MISSING_COLUMN: &str = "SPEC-003";
pub const SPEC_NO_TOTAL: &str = "SPEC-004";
pub const SPEC_FORMAT: &str = "SPEC-005";
pub const SPEC_UNVERIFIABLE: &str = "SPEC-006";
pub const SPEC_STEP_INCOMPLETE: &str = "SPEC-007";
pub const SPEC_STEP_SKIPPED: &str = "SPEC-008";
pub const SUM_MISMATCH: &str = "SUM-001";
pub const SUM_MALFORMED: &str = "SUM-002";
pub const CIT_FABRICATED: &str = "CIT-001";
pub const CIT_QUOTE_MISMATCH: &str = "CIT-002";
pub const CIT_CONFLICT: &str = "CIT-003";
pub const CIT_NO_TEXT: &str = "CIT-004";
pub const SC_TOO_FEW: &str = "SC-001";
pub const SC_LOW: &str = "SC-002";
pub const SC_DISAGREE: &str = "SC-003";

/// Every finding code a detector may emit.
pub const REGISTRY: &[Code] = &[
    code(SPEC_MISSING_FILE, CheckKind::SpecConformance, Severity::Material, "has_file: no deliverable file matches the name"),
    code(SPEC_ROW_COUNT, CheckKind::SpecConformance, Severity::Material, "row_count: fewer data rows than required, or no table"),
    code(SPEC_MISSING_COLUMN, CheckKind::SpecConformance, Severity::Material, "column_present: no table has the column"),
    code(SPEC_NO_TOTAL, CheckKind::SpecConformance, Severity::Material, "total_declared: no table declares a TOTAL row"),
    code(SPEC_FORMAT, CheckKind::SpecConformance, Severity::Material, "format_is: no deliverable file has the format"),
    code(SPEC_UNVERIFIABLE, CheckKind::SpecConformance, Severity::Minor, "free-text criterion that cannot be checked automatically"),
    code(SPEC_STEP_INCOMPLETE, CheckKind::SpecConformance, Severity::Material, "a plan step has no completed output in the task history"),
    code(SPEC_STEP_SKIPPED, CheckKind::SpecConformance, Severity::Minor, "a plan step was skipped after its gate budget ran out"),
    code(SUM_MISMATCH, CheckKind::UnitTotalReconciliation, Severity::Material, "declared total differs from the sum of its rows"),
    code(SUM_MALFORMED, CheckKind::UnitTotalReconciliation, Severity::Material, "table cannot be reconciled (ragged row or non-numeric constituent)"),
    code(CIT_FABRICATED, CheckKind::CitationMatch, Severity::Material, "citation source_ref resolves to no attachment or recorded source"),
    code(CIT_QUOTE_MISMATCH, CheckKind::CitationMatch, Severity::Material, "quoted span does not occur in the cited source text"),
    code(CIT_CONFLICT, CheckKind::CitationMatch, Severity::Minor, "conflicting sources: same labelled claim cited with different values"),
    code(CIT_NO_TEXT, CheckKind::CitationMatch, Severity::Minor, "cited attachment has no recorded text to match against"),
    code(SC_TOO_FEW, CheckKind::SelfConsistency, Severity::Minor, "fewer than two redundant samples"),
    code(SC_LOW, CheckKind::SelfConsistency, Severity::Minor, "agreement below pass threshold but at least one half"),
    code(SC_DISAGREE, CheckKind::SelfConsistency, Severity::Material, "agreement below one half"),
];

pub fn lookup(code: &str) -> Option<&'static Code> {
    REGISTRY.iter().find(|c| c.code == code)
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckKind::SpecConformance => "spec_conformance",
            CheckKind::UnitTotalReconciliation => "unit_total_reconciliation",
            CheckKind::CitationMatch => "citation_match",
            CheckKind::SelfConsistency => "self_consistency",
        };
        f.write_str(s)
    }
}
