use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize_text, CheckKind, CheckReport, CheckStatus, Finding, SC_DISAGREE, SC_LOW};

/// Redundant runs per step unless configured otherwise.
pub const DEFAULT_K: usize = 3;

/// How to pull a comparable answer out of a step output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractKey {
    Exact,
    #[default]
    Normalized,
    FirstNumber,
    FirstLine,
}

impl FromStr for ExtractKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ExtractKey::Exact),
            "normalized" => Ok(ExtractKey::Normalized),
            "first_number" => Ok(ExtractKey::FirstNumber),
            "first_line" => Ok(ExtractKey::FirstLine),
            other => Err(format!("unknown extraction key `{other}`")),
        }
    }
}

impl ExtractKey {
    pub fn extract(self, sample: &str) -> Option<String> {
        match self {
            ExtractKey::Exact => Some(sample.to_string()),
            ExtractKey::Normalized => Some(normalize_text(sample)),
            ExtractKey::FirstLine => sample.lines().map(str::trim).find(|l| !l.is_empty()).map(normalize_text),
            ExtractKey::FirstNumber => {
                let start = sample.find(|c: char| c.is_ascii_digit())?;
                let digits: String = sample[start..]
                    .chars()
                    .take_while(|c| c.is_ascii_digit() || *c == '.')
                    .collect();
                let n: f64 = digits.trim_end_matches('.').parse().ok()?;
                Some(n.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("self-consistency needs at least 2 samples, got {0}")]
pub struct TooFewSamples(pub usize);

/// Size of the largest agreeing group, and the sample count. Samples with
/// no extractable answer agree with nothing.
pub fn modal_count(samples: &[String], key: ExtractKey) -> (usize, usize) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut any = 0;
    for s in samples {
        if let Some(a) = key.extract(s) {
            *counts.entry(a).or_default() += 1;
        } else {
            any = 1;
        }
    }
    let modal = counts.values().copied().max().unwrap_or(0).max(any.min(samples.len()));
    (modal, samples.len())
}

/// Agreement of `k` redundant answers. Thresholds are applied on the integer
/// counts, so 2/3 is uncertain and 7/10 passes without rounding surprises.
pub fn self_consistency(samples: &[String], key: ExtractKey) -> Result<CheckReport, TooFewSamples> {
    if samples.len() < 2 {
        return Err(TooFewSamples(samples.len()));
    }
    let (m, k) = modal_count(samples, key);
    let score = m as f64 / k as f64;
    let (status, findings) = if 10 * m >= 7 * k {
        (CheckStatus::Pass, vec![])
    } else if 2 * m >= k {
        (CheckStatus::Uncertain, vec![Finding::new(SC_LOW, format!("{m} of {k} samples agree"), None)])
    } else {
        (CheckStatus::Fail, vec![Finding::new(SC_DISAGREE, format!("{m} of {k} samples agree"), None)])
    };
    Ok(CheckReport {
        check_kind: CheckKind::SelfConsistency,
        step_index: 0,
        status,
        findings,
        score: Some(score),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(list: &[&str]) -> Vec<String> {
        list.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn unanimous() {
        let r = self_consistency(&s(&["A", "A", "A"]), ExtractKey::Exact).unwrap();
        assert_eq!((r.score, r.status), (Some(1.0), CheckStatus::Pass));
    }

    #[test]
    fn two_of_three_uncertain() {
        let r = self_consistency(&s(&["A", "A", "B"]), ExtractKey::Exact).unwrap();
        assert_eq!(r.score, Some(2.0 / 3.0));
        assert_eq!(r.status, CheckStatus::Uncertain);
    }

    #[test]
    fn all_different_fails() {
        let r = self_consistency(&s(&["A", "B", "C"]), ExtractKey::Exact).unwrap();
        assert_eq!(r.score, Some(1.0 / 3.0));
        assert_eq!(r.status, CheckStatus::Fail);
        assert!(r.has_material());
    }

    #[test]
    fn too_few() {
        assert_eq!(self_consistency(&s(&["A"]), ExtractKey::Exact), Err(TooFewSamples(1)));
    }

    #[test]
    fn keys() {
        let r = self_consistency(&s(&["Total: 42 units", "42", "about 42.0"]), ExtractKey::FirstNumber).unwrap();
        assert_eq!(r.score, Some(1.0));
        let r = self_consistency(&s(&["Yes \n", "yes", "no"]), ExtractKey::Normalized).unwrap();
        assert_eq!(r.score, Some(2.0 / 3.0));
        assert_eq!(modal_count(&s(&["x", "y"]), ExtractKey::FirstNumber), (1, 2));
    }

    #[test]
    fn seven_of_ten_passes() {
        let mut v = s(&["a"; 7]);
        v.extend(s(&["b", "c", "d"]));
        assert_eq!(self_consistency(&v, ExtractKey::Exact).unwrap().status, CheckStatus::Pass);
    }
}
