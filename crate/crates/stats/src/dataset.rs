//! Benchmark manifest: one JSON object per line with `task_id`, `area`,
//! `category`, `brief_path` and optional `attachments`, paths relative to the
//! manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use gatework_core::taxonomy::{self, Area, BENCHMARK_DISTRIBUTION};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task_id: String,
    pub area: Area,
    pub category: String,
    pub brief_path: String,
    #[serde(default)]
    pub attachments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Brief text per task id.
    pub briefs: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest invalid: {0}")]
    ManifestInvalid(String),
    #[error("distribution mismatch: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    DistributionMismatch(Vec<CellMismatch>),
}

/// A table cell whose count differs from the reference distribution.
/// `category` is `None` for area totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMismatch {
    pub area: Area,
    pub category: Option<String>,
    pub found: u32,
    pub expected: u32,
}

impl fmt::Display for CellMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.category {
            Some(c) => write!(f, "({} / {c}: {} vs {})", self.area, self.found, self.expected),
            None => write!(f, "({}: {} vs {})", self.area, self.found, self.expected),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub total: u32,
    pub expected_total: u32,
    pub area_counts: BTreeMap<Area, u32>,
    pub mismatches: Vec<CellMismatch>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.total == self.expected_total
    }
}

pub fn load_benchmark(manifest: &Path) -> Result<Dataset, DatasetError> {
    let invalid = |m: String| DatasetError::ManifestInvalid(m);
    let text = std::fs::read_to_string(manifest).map_err(|e| invalid(format!("{}: {e}", manifest.display())))?;
    let root = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut entries = Vec::new();
    let mut briefs = BTreeMap::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line).map_err(|err| invalid(format!("line {}: {err}", i + 1)))?;
        if !ids.insert(e.task_id.clone()) {
            return Err(invalid(format!("duplicate task_id {}", e.task_id)));
        }
        let brief = std::fs::read_to_string(root.join(&e.brief_path))
            .map_err(|err| invalid(format!("{}: brief {}: {err}", e.task_id, e.brief_path)))?;
        if brief.trim().is_empty() {
            return Err(invalid(format!("{}: empty brief", e.task_id)));
        }
        for a in &e.attachments {
            if !root.join(a).is_file() {
                return Err(invalid(format!("{}: missing attachment {a}", e.task_id)));
            }
        }
        briefs.insert(e.task_id.clone(), brief);
        entries.push(e);
    }
    if entries.is_empty() {
        return Err(invalid("no tasks".into()));
    }
    Ok(Dataset { root, entries, briefs })
}

/// Compare area totals and every (area, category) cell with the reference
/// distribution. Cells present in the data but not in the reference count as
/// mismatches with `expected = 0`.
pub fn validate_distribution(ds: &Dataset) -> ValidationReport {
    let mut cells: BTreeMap<(Area, String), u32> = BTreeMap::new();
    for e in &ds.entries {
        *cells.entry((e.area, e.category.clone())).or_default() += 1;
    }
    let mut area_counts: BTreeMap<Area, u32> = Area::ALL.iter().map(|a| (*a, 0)).collect();
    for ((a, _), n) in &cells {
        *area_counts.entry(*a).or_default() += n;
    }
    let mut mismatches = Vec::new();
    for a in Area::ALL {
        let expected = taxonomy::area_total(a);
        if area_counts[&a] != expected {
            mismatches.push(CellMismatch {
                area: a,
                category: None,
                found: area_counts[&a],
                expected,
            });
        }
    }
    for cell in BENCHMARK_DISTRIBUTION {
        let found = cells.remove(&(cell.area, cell.category.to_string())).unwrap_or(0);
        if found != cell.count {
            mismatches.push(CellMismatch {
                area: cell.area,
                category: Some(cell.category.to_string()),
                found,
                expected: cell.count,
            });
        }
    }
    for ((area, category), found) in cells {
        mismatches.push(CellMismatch {
            area,
            category: Some(category),
            found,
            expected: 0,
        });
    }
    ValidationReport {
        total: ds.entries.len() as u32,
        expected_total: taxonomy::BENCHMARK_TOTAL,
        area_counts,
        mismatches,
    }
}

impl Dataset {
    /// Strict validation: any mismatch is an error.
    pub fn check(&self) -> Result<ValidationReport, DatasetError> {
        let r = validate_distribution(self);
        if r.ok() {
            Ok(r)
        } else {
            Err(DatasetError::DistributionMismatch(r.mismatches))
        }
    }
}
