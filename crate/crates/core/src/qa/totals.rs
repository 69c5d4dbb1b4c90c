use thiserror::Error;

use super::{CheckKind, CheckReport, Finding, Location, Span, SUM_MALFORMED, SUM_MISMATCH};
use crate::deliverable::{Deliverable, TabularData};

/// Relative tolerance for totals involving non-integer values.
pub const REAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed table at row {row}, column {column}: {reason}")]
pub struct MalformedTable {
    pub row: usize,
    pub column: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Num {
    Int(i64),
    Real(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Real(r) => r,
        }
    }
}

fn parse_num(cell: &str) -> Option<Option<Num>> {
    let s = cell.trim();
    if s.is_empty() {
        return Some(None);
    }
    let s = s.strip_prefix('$').unwrap_or(s);
    if let Ok(i) = s.parse::<i64>() {
        return Some(Some(Num::Int(i)));
    }
    match s.parse::<f64>() {
        Ok(r) if r.is_finite() => Some(Some(Num::Real(r))),
        _ => None,
    }
}

fn findings_for(name: &str, table: &TabularData) -> Result<Vec<Finding>, MalformedTable> {
    let width = table.columns.len();
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != width {
            return Err(MalformedTable {
                row: r,
                column: row.len().min(width),
                reason: format!("row has {} cells, header has {width}", row.len()),
            });
        }
    }
    let mut findings = Vec::new();
    let mut block_start = 0;
    for (t, row) in table.rows.iter().enumerate() {
        if !TabularData::is_total_row(row) {
            continue;
        }
        let block = &table.rows[block_start..t];
        for col in 1..width {
            let declared = match parse_num(&row[col]) {
                Some(Some(n)) => n,
                // Blank or textual total cells declare nothing.
                _ => continue,
            };
            let mut int_sum: i128 = 0;
            let mut real_sum = 0.0;
            let mut all_int = matches!(declared, Num::Int(_));
            for (offset, r) in block.iter().enumerate() {
                match parse_num(&r[col]) {
                    Some(Some(Num::Int(i))) => {
                        int_sum += i as i128;
                        real_sum += i as f64;
                    }
                    Some(Some(Num::Real(x))) => {
                        all_int = false;
                        real_sum += x;
                    }
                    Some(None) => {}
                    None => {
                        return Err(MalformedTable {
                            row: block_start + offset,
                            column: col,
                            reason: format!("`{}` is not a number", r[col]),
                        })
                    }
                }
            }
            let (matches, diff) = if all_int {
                let d = match declared {
                    Num::Int(i) => i as i128,
                    Num::Real(_) => unreachable!(),
                };
                (d == int_sum, (d - int_sum) as f64)
            } else {
                let d = declared.as_f64();
                let scale = d.abs().max(real_sum.abs());
                ((d - real_sum).abs() <= REAL_TOLERANCE * scale, d - real_sum)
            };
            if !matches {
                let computed = if all_int { int_sum as f64 } else { real_sum };
                let mut f = Finding::new(
                    SUM_MISMATCH,
                    format!(
                        "column `{}`: declared total {} but rows sum to {} (discrepancy {})",
                        table.columns[col], row[col].trim(), computed, diff
                    ),
                    Some(Location::new(name, Span::Cell { row: t, column: col })),
                );
                f.discrepancy = Some(diff);
                findings.push(f);
            }
        }
        block_start = t + 1;
    }
    Ok(findings)
}

/// Check every declared `TOTAL` row against the contiguous block of rows above it.
pub fn reconcile_totals(table: &TabularData) -> Result<CheckReport, MalformedTable> {
    let findings = findings_for("", table)?;
    Ok(CheckReport::from_findings(CheckKind::UnitTotalReconciliation, 0, findings))
}

/// Reconcile all tables of a deliverable; unparseable tables become findings.
pub fn reconcile_deliverable(d: &Deliverable) -> CheckReport {
    let mut findings = Vec::new();
    for t in &d.tables {
        match findings_for(&t.name, &t.table) {
            Ok(mut f) => findings.append(&mut f),
            Err(e) => findings.push(Finding::new(
                SUM_MALFORMED,
                e.to_string(),
                Some(Location::new(&t.name, Span::Cell { row: e.row, column: e.column })),
            )),
        }
    }
    CheckReport::from_findings(CheckKind::UnitTotalReconciliation, d.step_index, findings)
}
