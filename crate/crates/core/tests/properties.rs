use std::collections::BTreeSet;

use gatework_core::orchestrator::{match_worker, RoutingRequest};
use gatework_core::qa::{reconcile_totals, self_consistency, CheckStatus, ExtractKey};
use gatework_core::workers::{WorkerKind, WorkerProfile};
use gatework_core::{Actor, AuditEvent, AuditLog, EventKind, Payload, TabularData};
use proptest::prelude::*;
use proptest::sample::subsequence;

const SKILLS: [&str; 4] = ["a", "b", "c", "d"];

fn worker() -> impl Strategy<Value = WorkerProfile> {
    (subsequence(SKILLS.to_vec(), 0..=4), 0u8..5, 1u8..4, 0i64..3, 0u8..3).prop_map(|(skills, rate, speed, avail, kind)| {
        let kind = [WorkerKind::Ai, WorkerKind::Expert, WorkerKind::QaExpert][kind as usize];
        let mut w = WorkerProfile::new("", kind, &skills, rate as f64);
        w.speed_factor = speed as f64;
        w.availability_at = avail;
        w
    })
}

fn pool() -> impl Strategy<Value = Vec<WorkerProfile>> {
    prop::collection::vec(worker(), 0..8).prop_map(|mut v| {
        for (i, w) in v.iter_mut().enumerate() {
            w.worker_id = format!("w{i}");
        }
        v
    })
}

proptest! {
    #[test]
    fn match_worker_ignores_pool_order(
        pool in pool(),
        need in subsequence(SKILLS.to_vec(), 1..=2),
        seed in any::<u64>(),
    ) {
        let req = RoutingRequest {
            required_skills: need.iter().map(|s| s.to_string()).collect(),
            deadline_hint: None,
            budget_hint: None,
            base_hours: 1.0,
        };
        let mut shuffled = pool.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut x = seed | 1;
        for i in (1..shuffled.len()).rev() {
            x ^= x << 13; x ^= x >> 7; x ^= x << 17;
            shuffled.swap(i, (x % (i as u64 + 1)) as usize);
        }
        let a = match_worker(&req, &pool);
        let b = match_worker(&req, &shuffled);
        prop_assert_eq!(a.clone(), b);
        // Oracle: lexicographic minimum over qualified workers.
        let best = pool
            .iter()
            .filter(|w| need.iter().all(|s| w.skills.contains(*s)))
            .min_by(|x, y| x.cost_rate.total_cmp(&y.cost_rate).then(x.availability_at.cmp(&y.availability_at)).then(x.worker_id.cmp(&y.worker_id)));
        prop_assert_eq!(a.ok().map(|m| m.worker_id), best.map(|w| w.worker_id.clone()));
    }

    #[test]
    fn totals_ignore_row_order(rows in prop::collection::vec((0i64..1000, 0i64..1000), 1..12), bump in 0i64..3, rot in 0usize..12) {
        let build = |order: &[(i64, i64)]| {
            let mut t = TabularData::new(["k", "x", "y"]);
            for (i, (x, y)) in order.iter().enumerate() {
                t.push_row([format!("r{i}"), x.to_string(), y.to_string()]);
            }
            let sx: i64 = order.iter().map(|r| r.0).sum();
            let sy: i64 = order.iter().map(|r| r.1).sum();
            t.push_row(["TOTAL".to_string(), (sx + bump).to_string(), sy.to_string()]);
            t
        };
        let mut rotated = rows.clone();
        let n = rotated.len();
        rotated.rotate_left(rot % n);
        rotated.reverse();
        let a = reconcile_totals(&build(&rows)).unwrap();
        let b = reconcile_totals(&build(&rotated)).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(&a.findings, &b.findings);
        prop_assert_eq!(a.status == CheckStatus::Pass, bump == 0);
    }

    #[test]
    fn self_consistency_score_is_modal_fraction(samples in prop::collection::vec(prop::sample::select(vec!["x", "y", "z"]), 2..12)) {
        let samples: Vec<String> = samples.into_iter().map(String::from).collect();
        let r = self_consistency(&samples, ExtractKey::Exact).unwrap();
        let m = ["x", "y", "z"].iter().map(|v| samples.iter().filter(|s| s == v).count()).max().unwrap();
        prop_assert_eq!(r.score, Some(m as f64 / samples.len() as f64));
        let mut rev = samples.clone();
        rev.reverse();
        prop_assert_eq!(self_consistency(&rev, ExtractKey::Exact).unwrap(), r);
    }

    #[test]
    fn audit_jsonl_round_trips(kinds in prop::collection::vec(0usize..16, 0..40), times in prop::collection::vec(any::<i64>(), 40)) {
        let mut log = AuditLog::new();
        for (i, k) in kinds.iter().enumerate() {
            let payload = Payload::new().with("n", i).with("note", format!("line {i}\n\"quoted\""));
            log.append(AuditEvent::new(i as u64, times[i], Actor::System, EventKind::PHASE_KINDS[*k], payload)).unwrap();
        }
        let text = log.to_jsonl();
        prop_assert_eq!(AuditLog::from_jsonl(&text).unwrap(), log);
    }
}

/// Enumerate every sample vector over three answers for k = 2..=6 and compare
/// scores and statuses with integer-count oracles.
#[test]
fn self_consistency_exact_on_enumeration() {
    let alphabet = ["p", "q", "r"];
    let mut seen = BTreeSet::new();
    for k in 2..=6u32 {
        for code in 0..3usize.pow(k) {
            let mut c = code;
            let samples: Vec<String> = (0..k)
                .map(|_| {
                    let s = alphabet[c % 3].to_string();
                    c /= 3;
                    s
                })
                .collect();
            let counts = alphabet.map(|a| samples.iter().filter(|s| *s == a).count());
            let m = *counts.iter().max().unwrap();
            let r = self_consistency(&samples, ExtractKey::Exact).unwrap();
            assert_eq!(r.score, Some(m as f64 / k as f64));
            let want = if 10 * m >= 7 * k as usize {
                CheckStatus::Pass
            } else if 2 * m >= k as usize {
                CheckStatus::Uncertain
            } else {
                CheckStatus::Fail
            };
            assert_eq!(r.status, want, "{samples:?}");
            seen.insert((m, k));
        }
    }
    assert!(seen.contains(&(2, 3)) && seen.contains(&(2, 6)));
}
