use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use gatework_core::Grade;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Source data is rounded to 0.01 h per column, so sums can drift this much.
pub const TOTAL_TOLERANCE_H: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Overall,
    Accuracy,
    Completeness,
    StyleFormatting,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Overall,
        Criterion::Accuracy,
        Criterion::Completeness,
        Criterion::StyleFormatting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Overall => "overall",
            Criterion::Accuracy => "accuracy",
            Criterion::Completeness => "completeness",
            Criterion::StyleFormatting => "style_formatting",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s
            .to_ascii_lowercase()
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join("_");
        match s.as_str() {
            "overall" => Ok(Criterion::Overall),
            "accuracy" => Ok(Criterion::Accuracy),
            "completeness" => Ok(Criterion::Completeness),
            "style" | "style_formatting" => Ok(Criterion::StyleFormatting),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

/// One graded task outcome for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledResult {
    pub task_id: String,
    pub system_id: String,
    pub labels: BTreeMap<Criterion, Grade>,
    pub connect_h: f64,
    pub exec_h: f64,
    pub total_h: f64,
    #[serde(default)]
    pub price_usd: Option<f64>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("task {task_id}: {reason}")]
    Invalid { task_id: String, reason: String },
}

impl LabeledResult {
    pub fn grade(&self, c: Criterion) -> Option<Grade> {
        self.labels.get(&c).copied()
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        let invalid = |reason: String| RecordError::Invalid {
            task_id: self.task_id.clone(),
            reason,
        };
        let declined = self.labels.values().any(|g| *g == Grade::Decline);
        if declined && !Criterion::ALL.iter().all(|c| self.grade(*c) == Some(Grade::Decline)) {
            return Err(invalid("Decline must apply to all four criteria".into()));
        }
        if (self.connect_h + self.exec_h - self.total_h).abs() > TOTAL_TOLERANCE_H + 1e-9 {
            return Err(invalid(format!(
                "total {} differs from {} + {}",
                self.total_h, self.connect_h, self.exec_h
            )));
        }
        if [self.connect_h, self.exec_h, self.total_h].iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(invalid("hours must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Parse and validate newline-delimited results. Blank lines are skipped.
pub fn read_results(text: &str) -> Result<Vec<LabeledResult>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: LabeledResult = serde_json::from_str(line).map_err(|source| RecordError::Parse { line: i + 1, source })?;
        r.validate()?;
        out.push(r);
    }
    Ok(out)
}
