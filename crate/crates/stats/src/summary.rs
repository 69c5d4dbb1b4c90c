use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_median_se, median};
use crate::record::LabeledResult;
use crate::StatsError;

/// Average with its sample SD, median with its bootstrap SE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub avg: f64,
    pub median: f64,
    pub avg_sd: f64,
    pub median_boot_se: f64,
}

impl Metric {
    pub fn of(values: &[f64], b: usize, seed: u64) -> Result<Metric, StatsError> {
        if values.is_empty() {
            return Err(StatsError::Empty);
        }
        Ok(Metric {
            avg: values.iter().sum::<f64>() / values.len() as f64,
            median: median(values),
            avg_sd: sample_sd(values),
            median_boot_se: bootstrap_median_se(values, b, seed)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub system_id: String,
    /// Absent when the system has no per-task price.
    pub price: Option<Metric>,
    pub connect: Metric,
    pub exec: Metric,
    pub total: Metric,
}

/// Sample standard deviation (n - 1); 0 for a single value.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Relative reduction of `new` against `base`, e.g. 0.53 for 16.4 vs 35.0.
pub fn reduction(new: f64, base: f64) -> f64 {
    1.0 - new / base
}

/// Price and time summary for one system. Every column is bootstrapped with
/// the same `seed`.
pub fn summarize_time_price(records: &[LabeledResult], system_id: &str, b: usize, seed: u64) -> Result<SummaryRow, StatsError> {
    let rows: Vec<&LabeledResult> = records.iter().filter(|r| r.system_id == system_id).collect();
    if rows.is_empty() {
        return Err(StatsError::NoRecords(system_id.to_string()));
    }
    let col = |f: fn(&LabeledResult) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
    let prices: Vec<f64> = rows.iter().filter_map(|r| r.price_usd).collect();
    Ok(SummaryRow {
        system_id: system_id.to_string(),
        price: if prices.is_empty() { None } else { Some(Metric::of(&prices, b, seed)?) },
        connect: Metric::of(&col(|r| r.connect_h), b, seed)?,
        exec: Metric::of(&col(|r| r.exec_h), b, seed)?,
        total: Metric::of(&col(|r| r.total_h), b, seed)?,
    })
}
