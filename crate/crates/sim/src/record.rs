use gatework_core::Grade;
use serde::{Deserialize, Serialize};

use crate::Regime;

/// Hours and dollars are kept in hundredths so the row sum is exact.
pub fn to_centi(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

pub fn from_centi(c: i64) -> f64 {
    c as f64 / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub task_id: String,
    pub regime: Regime,
    pub quality: Grade,
    pub connect_h: f64,
    pub exec_h: f64,
    pub total_h: f64,
    pub price_usd: f64,
    pub n_escalations: u32,
    pub n_reworks: u32,
}

impl SimRecord {
    /// Round raw hours and price to 0.01; total is the sum of the rounded parts.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task_id: String,
        regime: Regime,
        quality: Grade,
        connect_h: f64,
        exec_h: f64,
        price_usd: f64,
        n_escalations: u32,
        n_reworks: u32,
    ) -> Self {
        let c = to_centi(connect_h);
        let e = if quality == Grade::Decline { 0 } else { to_centi(exec_h) };
        SimRecord {
            task_id,
            regime,
            quality,
            connect_h: from_centi(c),
            exec_h: from_centi(e),
            total_h: from_centi(c + e),
            price_usd: from_centi(to_centi(price_usd.max(0.0))),
            n_escalations,
            n_reworks,
        }
    }

    /// Conservation in hundredths of an hour.
    pub fn conserves_time(&self) -> bool {
        to_centi(self.total_h) == to_centi(self.connect_h) + to_centi(self.exec_h)
    }
}

pub fn to_jsonl(records: &[SimRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<SimRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
