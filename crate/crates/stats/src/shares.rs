use std::collections::BTreeMap;

use gatework_core::Grade;
use serde::{Deserialize, Serialize};

use crate::record::{Criterion, LabeledResult};
use crate::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareEstimate {
    pub share: f64,
    /// Binomial standard error `sqrt(share (1 - share) / n)`.
    pub se: f64,
    pub n: u64,
}

impl ShareEstimate {
    pub fn count(&self) -> u64 {
        (self.share * self.n as f64).round() as u64
    }
}

pub fn share_from_counts(k: u64, n: u64) -> ShareEstimate {
    assert!(n > 0 && k <= n, "share_from_counts({k}, {n})");
    let share = k as f64 / n as f64;
    ShareEstimate {
        share,
        se: (share * (1.0 - share) / n as f64).sqrt(),
        n,
    }
}

/// Shares of each grade for one system and criterion. Declines count in the
/// denominator; a record without a label for the criterion counts as Decline
/// only if it declined overall, otherwise it is skipped.
pub fn quality_shares(
    records: &[LabeledResult],
    system_id: &str,
    criterion: Criterion,
) -> Result<BTreeMap<Grade, ShareEstimate>, StatsError> {
    let mut counts: BTreeMap<Grade, u64> = Grade::ALL.iter().map(|g| (*g, 0)).collect();
    let mut n = 0;
    for r in records.iter().filter(|r| r.system_id == system_id) {
        let g = r
            .grade(criterion)
            .or_else(|| (r.grade(Criterion::Overall) == Some(Grade::Decline)).then_some(Grade::Decline));
        if let Some(g) = g {
            *counts.entry(g).or_default() += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(StatsError::NoRecords(system_id.to_string()));
    }
    Ok(counts.into_iter().map(|(g, k)| (g, share_from_counts(k, n))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(counts: [u64; 4]) -> Vec<LabeledResult> {
        let mut out = Vec::new();
        for (g, k) in Grade::ALL.into_iter().zip(counts) {
            for _ in 0..k {
                out.push(LabeledResult {
                    task_id: format!("t{}", out.len()),
                    system_id: "S".into(),
                    labels: Criterion::ALL.iter().map(|c| (*c, g)).collect(),
                    connect_h: 0.0,
                    exec_h: 0.0,
                    total_h: 0.0,
                    price_usd: None,
                    notes: String::new(),
                });
            }
        }
        out
    }

    #[test]
    fn hybrid_overall_good() {
        let s = quality_shares(&records([70, 15, 8, 1]), "S", Criterion::Overall).unwrap();
        let good = s[&Grade::Good];
        assert_eq!(good.n, 94);
        assert!((good.share * 100.0 - 74.5).abs() < 0.05);
        assert!((good.se * 100.0 - 4.5).abs() < 0.05);
        let total: f64 = s.values().map(|e| e.share).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn human_only_overall_good() {
        let s = quality_shares(&records([50, 24, 20, 0]), "S", Criterion::Overall).unwrap();
        assert!((s[&Grade::Good].share * 100.0 - 53.2).abs() < 0.05);
        assert!((s[&Grade::Good].se * 100.0 - 5.1).abs() < 0.05);
    }

    #[test]
    fn all_good_has_zero_error() {
        let s = quality_shares(&records([10, 0, 0, 0]), "S", Criterion::Overall).unwrap();
        assert_eq!(s[&Grade::Good].share, 1.0);
        assert_eq!(s[&Grade::Good].se, 0.0);
    }

    #[test]
    fn unknown_system() {
        assert_eq!(
            quality_shares(&records([1, 0, 0, 0]), "X", Criterion::Overall),
            Err(StatsError::NoRecords("X".into()))
        );
    }
}
