mod support;

use std::fs;
use std::path::Path;

use serde_json::Value;
use support::{cli, fixture, repo, stderr, stdout, Server, CONTACTS};

fn json_rows(out: &str) -> Vec<Value> {
    out.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn shares_from_the_count_fixture() {
    let o = cli(&["stats", "shares", "--system", "human_only", "--criterion", "overall", "--json"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = json_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let good = rows.iter().find(|r| r["grade"] == "Good").unwrap();
    assert_eq!((good["pct"].as_str(), good["pm"].as_str()), (Some("53.2"), Some("5.1")));
    assert_eq!(good["count"], 50);

    let text = stdout(&cli(&["stats", "shares"], None));
    assert!(text.lines().next().unwrap().starts_with("system"));
    assert!(text.contains("74.5"));
}

#[test]
fn ztest_from_counts_and_from_fixture_agree() {
    let a = cli(&["stats", "ztest", "--x1", "70", "--n1", "94", "--x2", "50", "--n2", "94", "--json"], None);
    let b = cli(&["stats", "ztest", "--json"], None);
    assert!(a.status.success() && b.status.success());
    let (a, b): (Value, Value) = (serde_json::from_str(&stdout(&a)).unwrap(), serde_json::from_str(&stdout(&b)).unwrap());
    assert_eq!(a, b);
    let z = a["z"].as_f64().unwrap();
    assert!((z - 3.0357).abs() < 1e-3);
}

#[test]
fn summary_reports_sums_and_reductions() {
    let o = cli(&["stats", "summary", "--json"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for c in v["time_checks"].as_array().unwrap() {
        assert!(c["diff"].as_f64().unwrap().abs() <= 0.1 + 1e-9, "{c}");
    }
    let red: Vec<f64> = v["reductions"].as_array().unwrap().iter().map(|r| r["reduction"].as_f64().unwrap()).collect();
    assert_eq!(red.len(), 2);
    assert!((red[1] - 0.36).abs() < 1e-12);
}

#[test]
fn frontier_points_from_fixtures() {
    let o = cli(&["stats", "frontier", "--json"], None);
    let rows = json_rows(&stdout(&o));
    let pts: Vec<(String, f64, f64)> = rows
        .iter()
        .map(|r| (r["system_id"].as_str().unwrap().to_string(), r["median_total_h"].as_f64().unwrap(), r["pct_good"].as_f64().unwrap()))
        .collect();
    assert_eq!(
        pts,
        vec![("ai_only".into(), 0.13, 40.4), ("human_only".into(), 34.97, 53.2), ("hybrid".into(), 16.42, 74.5)]
    );
}

fn copy_benchmark(dst: &Path) {
    let src = fixture("benchmark");
    fs::create_dir_all(dst.join("briefs")).unwrap();
    fs::copy(src.join("manifest.jsonl"), dst.join("manifest.jsonl")).unwrap();
    for e in fs::read_dir(src.join("briefs")).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), dst.join("briefs").join(e.file_name())).unwrap();
    }
}

#[test]
fn validate_dataset_accepts_the_release_and_names_perturbed_cells() {
    let o = cli(&["validate-dataset", fixture("benchmark/manifest.jsonl").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("tasks 94"));

    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("datasets/benchmark");
    copy_benchmark(&ds);
    let manifest = ds.join("manifest.jsonl");
    let text = fs::read_to_string(&manifest).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut first: Value = serde_json::from_str(&lines[0]).unwrap();
    let category = first["category"].as_str().unwrap().to_string();
    first["area"] = Value::from("Operations");
    lines[0] = first.to_string();
    fs::write(&manifest, lines.join("\n") + "\n").unwrap();

    // Default manifest location under the root.
    let o = cli(&["validate-dataset"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("(Sales: 19 vs 20)"), "{err}");
    assert!(err.contains("(Operations: 29 vs 28)"), "{err}");
    assert!(err.contains(&format!("(Sales / {category}:")), "{err}");

    let o = cli(&["validate-dataset", "/does/not/exist.jsonl"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_drivers() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo().join("config/calibration.toml");
    let run = |name: &str, drivers: &str| {
        let out = dir.path().join(name);
        let o = cli(
            &["simulate", "--config", config.to_str().unwrap(), "--seed", "5", "--n-tasks", "300", "--regime", "hybrid",
              "--out", out.to_str().unwrap(), "--drivers", drivers],
            None,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("not a real-world measurement"));
        (fs::read(out.join("records.jsonl")).unwrap(), fs::read(out.join("manifest.json")).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(String::from_utf8(a.0).unwrap().lines().count(), 300);
}

#[test]
fn simulate_defaults_into_the_runs_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["simulate", "--n-tasks", "20", "--regime", "human-only", "--seed", "1"], Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("runs/human_only-seed1-n20");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["n_tasks"], 20);
    // Simulator records feed the stats commands directly.
    let o = cli(&["stats", "shares", "--results", run.join("records.jsonl").to_str().unwrap(), "--json"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json_rows(&stdout(&o)).iter().all(|r| r["system_id"] == "human_only" && r["n"] == 20));
}

#[test]
fn replay_matches_the_service_and_root_env_wins() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());
    let t = server.submit(CONTACTS, "replay me");
    let id = t["task_id"].as_str().unwrap().to_string();
    let served = server.task(&id);
    server.kill();

    // The flag points elsewhere; the environment variable decides.
    let o = cli(&["replay", &id, "--json", "--root", "/nonexistent"], Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["state"], served["state"]);
    assert_eq!(v["pending_gates"], served["pending_gates"]);

    let o = cli(&["replay", &id], Some(dir.path()));
    let text = stdout(&o);
    assert!(text.contains("TaskSubmitted") && text.contains("pending gate"), "{text}");

    let o = cli(&["replay", "task-424242"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}
