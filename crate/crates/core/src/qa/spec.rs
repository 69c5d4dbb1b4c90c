use serde::{Deserialize, Serialize};

use super::{
    CheckKind, CheckReport, Finding, Location, Span, SPEC_FORMAT, SPEC_MISSING_COLUMN, SPEC_MISSING_FILE,
    SPEC_NO_TOTAL, SPEC_ROW_COUNT, SPEC_UNVERIFIABLE,
};
use crate::deliverable::{Deliverable, TabularData};

/// One acceptance criterion: a machine-checkable predicate tag or free text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "arg", rename_all = "snake_case")]
pub enum Criterion {
    HasFile(String),
    /// Minimum data rows, optionally in a named table (otherwise the first).
    RowCount { table: Option<String>, min: usize },
    ColumnPresent(String),
    TotalDeclared,
    FormatIs(String),
    FreeText(String),
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"')
        .and_then(|x| x.strip_suffix('"'))
        .or_else(|| s.strip_prefix('\'').and_then(|x| x.strip_suffix('\'')))
        .unwrap_or(s)
}

/// `name(arg)` -> `arg`, if `text` has that shape.
fn call<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    let rest = text.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(unquote(inner))
}

impl Criterion {
    pub fn parse(text: &str) -> Criterion {
        let t = text.trim();
        let free = || Criterion::FreeText(t.to_string());
        if let Some(arg) = call(t, "has_file") {
            return if arg.is_empty() { free() } else { Criterion::HasFile(arg.to_string()) };
        }
        if let Some(arg) = call(t, "column_present") {
            return if arg.is_empty() { free() } else { Criterion::ColumnPresent(arg.to_string()) };
        }
        if let Some(arg) = call(t, "format_is") {
            let ext = arg.trim_start_matches('.').to_ascii_lowercase();
            return if ext.is_empty() { free() } else { Criterion::FormatIs(ext) };
        }
        if t == "total_declared" || t == "total_declared()" {
            return Criterion::TotalDeclared;
        }
        if let Some(rest) = t.strip_prefix("row_count") {
            let rest = rest.trim_start();
            let (table, rest) = match rest.strip_prefix('(') {
                Some(r) => match r.split_once(')') {
                    Some((name, after)) => (Some(unquote(name).to_string()), after.trim_start()),
                    None => return free(),
                },
                None => (None, rest),
            };
            let num = rest
                .strip_prefix(">=")
                .or_else(|| rest.strip_prefix('≥'))
                .map(str::trim);
            if let Some(Ok(min)) = num.map(str::parse::<usize>) {
                return Criterion::RowCount { table, min };
            }
            return free();
        }
        free()
    }

    pub fn is_checkable(&self) -> bool {
        !matches!(self, Criterion::FreeText(_))
    }
}

fn first_table<'a>(d: &'a Deliverable, name: Option<&str>) -> Option<(&'a str, &'a TabularData)> {
    match name {
        Some(n) => d
            .tables
            .iter()
            .find(|t| t.name == n || t.name.rsplit_once('.').is_some_and(|(s, _)| s == n))
            .map(|t| (t.name.as_str(), &t.table)),
        None => d.tables.first().map(|t| (t.name.as_str(), &t.table)),
    }
}

/// Evaluate acceptance criteria against a deliverable.
pub fn check_spec_conformance(deliverable: &Deliverable, criteria: &[String]) -> CheckReport {
    let mut findings = Vec::new();
    for (index, raw) in criteria.iter().enumerate() {
        let at = |file: &str| Some(Location::new(file, Span::Criterion { index }));
        match Criterion::parse(raw) {
            Criterion::HasFile(name) => {
                let found = deliverable.files.iter().any(|f| f.answers_to(&name))
                    || deliverable.table(&name).is_some();
                if !found {
                    findings.push(Finding::new(SPEC_MISSING_FILE, format!("no file named `{name}`"), at(&name)));
                }
            }
            Criterion::RowCount { table, min } => match first_table(deliverable, table.as_deref()) {
                Some((file, t)) => {
                    let n = t.data_row_count();
                    if n < min {
                        findings.push(Finding::new(
                            SPEC_ROW_COUNT,
                            format!("`{file}` has {n} data rows, {min} required"),
                            at(file),
                        ));
                    }
                }
                None => findings.push(Finding::new(
                    SPEC_ROW_COUNT,
                    format!("no table to count rows in, {min} required"),
                    at(table.as_deref().unwrap_or("")),
                )),
            },
            Criterion::ColumnPresent(col) => {
                let found = deliverable
                    .tables
                    .iter()
                    .any(|t| t.table.columns.iter().any(|c| c.trim().eq_ignore_ascii_case(col.trim())));
                if !found {
                    findings.push(Finding::new(SPEC_MISSING_COLUMN, format!("no table has column `{col}`"), at("")));
                }
            }
            Criterion::TotalDeclared => {
                if !deliverable.tables.iter().any(|t| t.table.has_total()) {
                    findings.push(Finding::new(SPEC_NO_TOTAL, "no table declares a TOTAL row", at("")));
                }
            }
            Criterion::FormatIs(ext) => {
                let found = deliverable.files.iter().any(|f| f.extension().as_deref() == Some(ext.as_str()))
                    || deliverable.tables.iter().any(|t| t.name.to_ascii_lowercase().ends_with(&format!(".{ext}")));
                if !found {
                    findings.push(Finding::new(SPEC_FORMAT, format!("no `.{ext}` file delivered"), at("")));
                }
            }
            Criterion::FreeText(text) => {
                findings.push(Finding::new(SPEC_UNVERIFIABLE, format!("needs human review: {text}"), at("")));
            }
        }
    }
    CheckReport::from_findings(CheckKind::SpecConformance, deliverable.step_index, findings)
}
