//! One line per acceptance criterion. Exits non-zero if any criterion fails.

mod support;
#[path = "../../core/tests/support/state_oracle.rs"]
mod state_oracle;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gatework_core::qa::corpus;
use gatework_core::qa::{match_citations, reconcile_deliverable, self_consistency, CheckStatus, ExtractKey, Finding};
use gatework_core::{Deliverable, Grade};
use gatework_sim::{SimRecord, MANIFEST_LABEL};
use gatework_stats::median;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use support::{cli, fixture, repo, stderr, stdout, Server, CONTACTS};

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol + 1e-9
}

fn json_out(args: &[&str]) -> Result<Value, String> {
    let o = cli(args, None);
    ensure(o.status.success(), format!("{args:?} exited {:?}: {}", o.status.code(), stderr(&o)))?;
    serde_json::from_str(&stdout(&o)).map_err(|e| e.to_string())
}

fn shares_reproduce() -> Check {
    let started = Instant::now();
    let o = cli(&["stats", "shares", "--json"], None);
    let elapsed = started.elapsed();
    ensure(o.status.success(), stderr(&o))?;
    let rows: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let printed: Value = serde_json::from_str(&fs::read_to_string(fixture("published/quality_printed.json")).unwrap()).unwrap();
    let cells = printed["cells"].as_array().unwrap();
    let mut misses = vec![];
    for c in cells {
        let row = rows
            .iter()
            .find(|r| r["system_id"] == c["system_id"] && r["criterion"] == c["criterion"] && r["grade"] == c["grade"])
            .ok_or_else(|| format!("no row for {c}"))?;
        let pct = 100.0 * row["share"].as_f64().unwrap();
        let pm = 100.0 * row["se"].as_f64().unwrap();
        let (want_pct, want_pm) = (c["pct"].as_f64().unwrap(), c["pm"].as_f64().unwrap());
        if !within(pct, want_pct, 0.05) || !within(pm, want_pm, 0.05) {
            misses.push(format!(
                "{}/{}/{} {pct:.3} ± {pm:.3} vs {want_pct} ± {want_pm}",
                c["system_id"].as_str().unwrap(),
                c["criterion"].as_str().unwrap(),
                c["grade"].as_str().unwrap()
            ));
        }
    }
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    ensure(misses.is_empty(), format!("{} of {} cells off: {}", misses.len(), cells.len(), misses.join("; ")))?;
    Ok(format!("{} cells in {elapsed:.2?}", cells.len()))
}

fn ztest_reproduces() -> Check {
    let v = json_out(&["stats", "ztest", "--x1", "70", "--n1", "94", "--x2", "50", "--n2", "94", "--json"])?;
    let (z, p) = (v["z"].as_f64().unwrap(), v["p_one_sided"].as_f64().unwrap());
    ensure((3.03..=3.05).contains(&z) && (0.0010..=0.0014).contains(&p), format!("z {z} p {p}"))?;
    Ok(format!("z {z:.4} p {p:.6}"))
}

fn summary_arithmetic() -> Check {
    let v = json_out(&["stats", "summary", "--json"])?;
    for c in v["time_checks"].as_array().unwrap() {
        if c["system_id"] == "ai_only" {
            continue;
        }
        ensure(within(c["diff"].as_f64().unwrap(), 0.0, 0.1), format!("time check {c}"))?;
    }
    let red = |metric: &str| -> f64 {
        v["reductions"].as_array().unwrap().iter().find(|r| r["metric"] == metric).unwrap()["reduction"]
            .as_f64()
            .unwrap()
    };
    let (t, p) = (red("median_total_h"), red("median_price_usd"));
    ensure(within(100.0 * t, 53.0, 1.0), format!("time reduction {t}"))?;
    ensure((100.0 * p).round() == 36.0, format!("price reduction {p}"))?;
    Ok(format!("time -{:.0}% price -{:.0}%", 100.0 * t, 100.0 * p))
}

fn frontier_exact() -> Check {
    let o = cli(&["stats", "frontier", "--json"], None);
    ensure(o.status.success(), stderr(&o))?;
    let got: BTreeSet<(String, String)> = stdout(&o)
        .lines()
        .map(|l| {
            let r: Value = serde_json::from_str(l).unwrap();
            (r["median_total_h"].to_string(), r["pct_good"].to_string())
        })
        .collect();
    let want: BTreeSet<(String, String)> =
        [("16.42", "74.5"), ("34.97", "53.2"), ("0.13", "40.4")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    ensure(got == want, format!("{got:?}"))?;
    Ok("3 points".into())
}

fn state_machine_suite() -> Check {
    let started = Instant::now();
    let t = state_oracle::run(10_000, 0xacce);
    let elapsed = started.elapsed();
    ensure(t.clean(), format!("{t:?}"))?;
    ensure(t.sequences == 10_000, format!("{} sequences", t.sequences))?;
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{} sequences, {} events accepted, {elapsed:.2?}", t.sequences, t.accepted))
}

fn detect(d: &Deliverable) -> Vec<Finding> {
    [reconcile_deliverable(d), match_citations(d, &d.files, &d.sources)].into_iter().flat_map(|r| r.findings).collect()
}

fn qa_suite() -> Check {
    let all = corpus::load(&fixture("qa-corpus")).map_err(|e| e.to_string())?;
    ensure(all.len() == 20, format!("{} fixtures", all.len()))?;
    let mut faults = 0;
    for f in &all {
        let found = detect(&f.faulty);
        for expected in &f.manifest.faults {
            faults += 1;
            let hit = found
                .iter()
                .any(|x| x.code == expected.code && x.is_material() && x.location.as_ref() == Some(&expected.location));
            ensure(hit, format!("fixture {}: {} missed", f.manifest.fixture, expected.code))?;
        }
        let clean = detect(&f.clean);
        ensure(clean.iter().all(|x| !x.is_material()), format!("fixture {}: clean twin flagged", f.manifest.fixture))?;
    }
    let mut vectors = 0;
    for k in 2..=6u32 {
        for code in 0..3usize.pow(k) {
            let samples: Vec<String> = (0..k).map(|i| ((code / 3usize.pow(i)) % 3).to_string()).collect();
            let m = (0..3).map(|a| samples.iter().filter(|s| **s == a.to_string()).count()).max().unwrap();
            let r = self_consistency(&samples, ExtractKey::Exact).unwrap();
            ensure(r.score == Some(m as f64 / k as f64), format!("{samples:?} scored {:?}", r.score))?;
            let want = if 10 * m >= 7 * k as usize {
                CheckStatus::Pass
            } else if 2 * m >= k as usize {
                CheckStatus::Uncertain
            } else {
                CheckStatus::Fail
            };
            ensure(r.status == want, format!("{samples:?} status {:?}", r.status))?;
            vectors += 1;
        }
    }
    Ok(format!("{faults} faults flagged, {} clean twins quiet, {vectors} agreement vectors", all.len()))
}

fn simulate(dir: &std::path::Path, name: &str, regime: &str, n: &str, drivers: &str) -> Result<(Vec<u8>, Vec<u8>, String), String> {
    let out = dir.join(name);
    let config = repo().join("config/calibration.toml");
    let o = cli(
        &["simulate", "--config", config.to_str().unwrap(), "--regime", regime, "--n-tasks", n, "--out",
          out.to_str().unwrap(), "--drivers", drivers],
        None,
    );
    ensure(o.status.success(), stderr(&o))?;
    let rd = |f: &str| fs::read(out.join(f)).map_err(|e| e.to_string());
    Ok((rd("records.jsonl")?, rd("manifest.json")?, stdout(&o)))
}

fn records(bytes: &[u8]) -> Vec<SimRecord> {
    std::str::from_utf8(bytes).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn simulator() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a", "hybrid", "10000", "1")?;
    let b = simulate(dir.path(), "b", "hybrid", "10000", "1")?;
    let c = simulate(dir.path(), "c", "hybrid", "10000", "4")?;
    ensure(a.0 == b.0 && a.1 == b.1, "two runs differ")?;
    ensure(a.0 == c.0 && a.1 == c.1, "1 vs 4 drivers differ")?;
    let h = simulate(dir.path(), "h", "human-only", "10000", "1")?;
    let manifest = String::from_utf8(a.1.clone()).unwrap();
    ensure(manifest.contains(MANIFEST_LABEL) && a.2.contains(MANIFEST_LABEL), "calibration label missing")?;

    let hybrid = records(&a.0);
    let human = records(&h.0);
    let good = 100.0 * hybrid.iter().filter(|r| r.quality == Grade::Good).count() as f64 / hybrid.len() as f64;
    let med = |rs: &[SimRecord]| median(&rs.iter().map(|r| r.total_h).collect::<Vec<_>>());
    let ratio = med(&hybrid) / med(&human);
    ensure(within(good, 74.5, 3.0), format!("hybrid good {good:.2}%"))?;
    ensure(within(ratio, 0.47, 0.05), format!("median ratio {ratio:.3}"))?;
    Ok(format!("good {good:.2}%, median ratio {ratio:.3}"))
}

fn dataset() -> Check {
    let o = cli(&["validate-dataset", fixture("benchmark/manifest.jsonl").to_str().unwrap()], None);
    let text = stdout(&o);
    ensure(o.status.code() == Some(0), format!("release exited {:?}: {}", o.status.code(), stderr(&o)))?;
    ensure(text.contains("tasks 94") && text.contains("Sales 20 / Operations 28 / Marketing 24 / Analysis 22"), text)?;

    let dir = tempfile::tempdir().unwrap();
    let src = fixture("benchmark");
    fs::create_dir_all(dir.path().join("briefs")).unwrap();
    for e in fs::read_dir(src.join("briefs")).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), dir.path().join("briefs").join(e.file_name())).unwrap();
    }
    let original = fs::read_to_string(src.join("manifest.jsonl")).unwrap();
    let mut lines: Vec<Value> = original.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let i = lines.iter().position(|l| l["area"] == "Marketing").unwrap();
    lines[i]["area"] = Value::from("Analysis");
    let path = dir.path().join("manifest.jsonl");
    fs::write(&path, lines.iter().map(|l| l.to_string() + "\n").collect::<String>()).unwrap();
    let o = cli(&["validate-dataset", path.to_str().unwrap()], None);
    let err = stderr(&o);
    ensure(o.status.code() == Some(1), format!("perturbed exited {:?}", o.status.code()))?;
    ensure(err.contains("Marketing: 23 vs 24") && err.contains("Analysis: 23 vs 22"), err)?;
    Ok("94 tasks; perturbed cell named".into())
}

fn state_hash(s: &Server) -> String {
    s.get("/stats").payload()["state_hash"].as_str().unwrap().to_string()
}

fn durability() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xd0);
    let mut server = Server::start(dir.path());
    let mut kills = 0;
    for _ in 0..24 {
        let gates = server.gates();
        let roll: f64 = rng.random();
        if gates.is_empty() || roll < 0.3 {
            server.submit(CONTACTS, "durability batch");
        } else if roll < 0.7 {
            let id = gates[rng.random_range(0..gates.len())]["gate_id"].as_str().unwrap().to_string();
            server.decide(&id, if roll < 0.4 { "reject_with_notes" } else { "approve" }, "recheck");
        } else {
            let tasks = server.get("/tasks").payload().as_array().cloned().unwrap_or_default();
            if let Some(t) = tasks.iter().find(|t| t["waiting"]["waiting_for"] == "deliverable") {
                let step = t["waiting"]["step"].as_u64().unwrap();
                server.upload(t["task_id"].as_str().unwrap(), step, "verified");
            }
        }
        let before = state_hash(&server);
        server.kill();
        server = Server::start(dir.path());
        kills += 1;
        let after = state_hash(&server);
        ensure(before == after, format!("hash changed after kill {kills}"))?;
    }
    let tasks = server.get("/stats").payload()["tasks"].as_u64().unwrap();
    server.kill();
    Ok(format!("{kills} kills, {tasks} tasks"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "quality shares", shares_reproduce),
        (2, "two-proportion z-test", ztest_reproduces),
        (3, "time and price arithmetic", summary_arithmetic),
        (4, "frontier points", frontier_exact),
        (5, "state machine suite", state_machine_suite),
        (6, "qa detector suite", qa_suite),
        (7, "simulator determinism and calibration", simulator),
        (8, "dataset validation", dataset),
        (9, "durability", durability),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, check) in criteria {
        let r = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match r {
            Ok(detail) => println!("CRITERION {n} PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("CRITERION {n} FAIL {name}: {why}");
            }
        }
    }
    println!("{} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
