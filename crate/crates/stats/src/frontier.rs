use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::shares::ShareEstimate;
use crate::summary::SummaryRow;
use crate::StatsError;

/// One system on the quality-vs-time plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub system_id: String,
    pub median_total_h: f64,
    pub pct_good: f64,
}

impl FrontierPoint {
    /// `(hours, percent)` at presentation precision: 0.01 h and 0.1 pp.
    pub fn display_pair(&self) -> (String, String) {
        (format!("{:.2}", self.median_total_h), format!("{:.1}", self.pct_good))
    }
}

/// One point per system, sorted by system id. `good` maps system id to its
/// overall Good share.
pub fn frontier_points(summaries: &[SummaryRow], good: &BTreeMap<String, ShareEstimate>) -> Result<Vec<FrontierPoint>, StatsError> {
    let a: BTreeSet<&str> = summaries.iter().map(|s| s.system_id.as_str()).collect();
    let b: BTreeSet<&str> = good.keys().map(String::as_str).collect();
    if a != b || a.len() != summaries.len() {
        let diff = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
        return Err(StatsError::SystemMismatch(diff));
    }
    let mut out: Vec<FrontierPoint> = summaries
        .iter()
        .map(|s| FrontierPoint {
            system_id: s.system_id.clone(),
            median_total_h: s.total.median,
            pct_good: good[&s.system_id].share * 100.0,
        })
        .collect();
    out.sort_by(|x, y| x.system_id.cmp(&y.system_id));
    Ok(out)
}
