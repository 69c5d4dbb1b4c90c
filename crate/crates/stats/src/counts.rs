//! Integer label counts behind printed percentages.

use std::collections::BTreeMap;

use gatework_core::Grade;
use serde::{Deserialize, Serialize};

use crate::record::Criterion;
use crate::shares::{share_from_counts, ShareEstimate};

/// Counts `k` in `0..=n` whose percentage `100 k / n` prints as `pct` at
/// `decimals` places.
pub fn counts_for_percentage(pct: f64, n: u64, decimals: u32) -> Vec<u64> {
    let half = 0.5 / 10f64.powi(decimals as i32);
    (0..=n).filter(|k| (100.0 * *k as f64 / n as f64 - pct).abs() <= half + 1e-9).collect()
}

/// Every vector of counts summing to `n` that reproduces all printed
/// percentages of one partition (for example Good/Mediocre/Bad/Decline).
pub fn recover_counts(pcts: &[f64], n: u64, decimals: u32) -> Vec<Vec<u64>> {
    let candidates: Vec<Vec<u64>> = pcts.iter().map(|p| counts_for_percentage(*p, n, decimals)).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(pcts.len());
    fn walk(c: &[Vec<u64>], n: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == c.len() {
            if cur.iter().sum::<u64>() == n {
                out.push(cur.clone());
            }
            return;
        }
        for k in &c[cur.len()] {
            cur.push(*k);
            walk(c, n, cur, out);
            cur.pop();
        }
    }
    walk(&candidates, n, &mut cur, &mut out);
    out
}

/// Known label counts for one criterion. Grades that were not reported are
/// absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriterionCounts(pub BTreeMap<Grade, u64>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemCounts {
    pub system_id: String,
    pub criteria: BTreeMap<Criterion, CriterionCounts>,
}

/// Count fixture: `n` tasks per system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsFile {
    pub n: u64,
    pub systems: Vec<SystemCounts>,
    #[serde(default)]
    pub derivation: String,
}

impl CountsFile {
    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        for s in &self.systems {
            for (c, counts) in &s.criteria {
                let sum: u64 = counts.0.values().sum();
                if sum > self.n || (counts.0.len() == Grade::ALL.len() && sum != self.n) {
                    return Err(format!("{} {c}: counts sum to {sum}, expected {}", s.system_id, self.n));
                }
            }
        }
        Ok(())
    }

    pub fn system(&self, id: &str) -> Option<&SystemCounts> {
        self.systems.iter().find(|s| s.system_id == id)
    }

    /// Share estimates for every reported cell.
    pub fn shares(&self, system_id: &str, criterion: Criterion) -> Option<BTreeMap<Grade, ShareEstimate>> {
        let counts = self.system(system_id)?.criteria.get(&criterion)?;
        Some(counts.0.iter().map(|(g, k)| (*g, share_from_counts(*k, self.n))).collect())
    }
}

/// One printed cell: a percentage and its printed +/- value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedCell {
    pub system_id: String,
    pub criterion: Criterion,
    pub grade: Grade,
    pub pct: f64,
    pub pm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedTable {
    pub n: u64,
    pub decimals: u32,
    #[serde(default)]
    pub note: String,
    pub cells: Vec<PrintedCell>,
}

/// Recover integer counts for every printed cell. A criterion printed for all
/// four grades is solved jointly (counts must sum to `n`); other cells alone.
/// Fails unless every cell has exactly one solution.
pub fn derive_counts(table: &PrintedTable) -> Result<CountsFile, String> {
    let mut grouped: BTreeMap<(String, Criterion), BTreeMap<Grade, f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for c in &table.cells {
        if !order.contains(&c.system_id) {
            order.push(c.system_id.clone());
        }
        grouped.entry((c.system_id.clone(), c.criterion)).or_default().insert(c.grade, c.pct);
    }
    let mut systems: Vec<SystemCounts> = order
        .iter()
        .map(|s| SystemCounts {
            system_id: s.clone(),
            criteria: BTreeMap::new(),
        })
        .collect();
    for ((system, criterion), pcts) in grouped {
        let counts: BTreeMap<Grade, u64> = if pcts.len() == Grade::ALL.len() {
            let ordered: Vec<f64> = Grade::ALL.iter().map(|g| pcts[g]).collect();
            match recover_counts(&ordered, table.n, table.decimals).as_slice() {
                [one] => Grade::ALL.iter().copied().zip(one.iter().copied()).collect(),
                other => return Err(format!("{system} {criterion}: {} solutions", other.len())),
            }
        } else {
            let mut m = BTreeMap::new();
            for (g, p) in pcts {
                match counts_for_percentage(p, table.n, table.decimals).as_slice() {
                    [k] => m.insert(g, *k),
                    other => return Err(format!("{system} {criterion} {g}: {} solutions", other.len())),
                };
            }
            m
        };
        let s = systems.iter_mut().find(|s| s.system_id == system).expect("system listed");
        s.criteria.insert(criterion, CriterionCounts(counts));
    }
    Ok(CountsFile {
        n: table.n,
        systems,
        derivation: format!(
            "exhaustive search over k/{} matching every printed percentage at {} decimal(s); full partitions solved jointly",
            table.n, table.decimals
        ),
    })
}
