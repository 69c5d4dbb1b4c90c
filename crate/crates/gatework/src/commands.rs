//! Offline subcommands: simulation runs, statistics, dataset checks and log
//! replay. Each returns the text to print and an exit code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gatework_core::orchestrator::driver::TaskRun;
use gatework_core::{sha256_hex, AuditLog, Grade};
use gatework_sim::{run_sharded, write_run, Regime, Scenario, SimRecord, MANIFEST_LABEL};
use gatework_stats::{
    frontier_points, load_benchmark, median, quality_shares, read_results, reduction, summarize_time_price,
    two_prop_z_one_sided, validate_distribution, CountsFile, Criterion, LabeledResult, ShareEstimate, SummaryRow,
};
use serde::Serialize;
use serde_json::json;

use crate::store::Layout;

/// Text for stdout and stderr plus the process exit code.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            stdout,
            stderr: String::new(),
            code: 0,
        }
    }
}

/// Failure to run a command at all (bad input, unreadable file). Exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandError(pub String);

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Result<T> = std::result::Result<T, CommandError>;

fn fail(m: impl std::fmt::Display) -> CommandError {
    CommandError(m.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn json_lines<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
        .collect()
}

/// Left-align the first column, right-align the rest.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                let _ = write!(s, "{c:<w$}", w = widths[i]);
            } else {
                let _ = write!(s, "{c:>w$}", w = widths[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}


#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub n_tasks: Option<u64>,
    pub regime: Option<Regime>,
    pub out: Option<PathBuf>,
    pub drivers: usize,
}

/// Default output directory name for a run.
pub fn run_id(regime: Regime, seed: u64, n_tasks: u64) -> String {
    format!("{regime}-seed{seed}-n{n_tasks}")
}

pub fn simulate(layout: &Layout, args: &SimulateArgs) -> Result<Outcome> {
    let base = Scenario::load(&args.config).map_err(fail)?;
    let mut config = base.config.clone();
    config.seed = args.seed.unwrap_or(config.seed);
    config.n_tasks = args.n_tasks.unwrap_or(config.n_tasks);
    config.regime = args.regime.unwrap_or(config.regime);
    let scenario = Scenario::new(config, &base.templates_text).map_err(fail)?;
    let c = &scenario.config;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| layout.runs().join(run_id(c.regime, c.seed, c.n_tasks)));
    let records = run_sharded(&scenario, args.drivers.max(1)).map_err(fail)?;
    let manifest = write_run(&out, &scenario, &records).map_err(fail)?;
    let n = records.len() as f64;
    let good = records.iter().filter(|r| r.quality == Grade::Good).count() as f64 / n;
    let totals: Vec<f64> = records.iter().map(|r| r.total_h).collect();
    let prices: Vec<f64> = records.iter().map(|r| r.price_usd).collect();
    let mut s = String::new();
    let _ = writeln!(s, "wrote {} records to {}", records.len(), out.display());
    let _ = writeln!(s, "regime {}  seed {}", c.regime, c.seed);
    let _ = writeln!(s, "good share     {:.1}%", good * 100.0);
    let _ = writeln!(s, "median total   {:.2} h", median(&totals));
    let _ = writeln!(s, "median price   {:.2} USD", median(&prices));
    let _ = writeln!(s, "records sha256 {}", manifest.records_sha256);
    let _ = writeln!(s, "note: {MANIFEST_LABEL}");
    Ok(Outcome::ok(s))
}


/// Read labelled results, or simulator records turned into labelled results
/// with the regime as system id and the quality as every criterion's grade.
pub fn load_results(path: &Path) -> Result<Vec<LabeledResult>> {
    let text = read(path)?;
    match read_results(&text) {
        Ok(r) => Ok(r),
        Err(labelled) => {
            let sims: Vec<SimRecord> = gatework_sim::from_jsonl(&text)
                .map_err(|_| fail(format!("{}: {labelled}", path.display())))?;
            Ok(sims.iter().map(sim_to_labelled).collect())
        }
    }
}

pub fn sim_to_labelled(r: &SimRecord) -> LabeledResult {
    LabeledResult {
        task_id: r.task_id.clone(),
        system_id: r.regime.to_string(),
        labels: Criterion::ALL.iter().map(|c| (*c, r.quality)).collect(),
        connect_h: r.connect_h,
        exec_h: r.exec_h,
        total_h: r.total_h,
        price_usd: (r.quality != Grade::Decline).then_some(r.price_usd),
        notes: String::new(),
    }
}

fn load_counts(path: &Path) -> Result<CountsFile> {
    let counts: CountsFile = serde_json::from_str(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    counts.validate().map_err(fail)?;
    Ok(counts)
}

fn load_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    serde_json::from_str(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

/// Share table input: a count fixture or a results file.
#[derive(Debug, Clone)]
pub enum ShareSource {
    Counts(PathBuf),
    Results(PathBuf),
}

type ShareTable = Vec<(String, Criterion, BTreeMap<Grade, ShareEstimate>)>;

fn share_table(src: &ShareSource) -> Result<ShareTable> {
    let mut out = Vec::new();
    match src {
        ShareSource::Counts(p) => {
            let counts = load_counts(p)?;
            for s in &counts.systems {
                for c in s.criteria.keys() {
                    out.push((s.system_id.clone(), *c, counts.shares(&s.system_id, *c).expect("present")));
                }
            }
        }
        ShareSource::Results(p) => {
            let records = load_results(p)?;
            let mut systems: Vec<String> = Vec::new();
            for r in &records {
                if !systems.contains(&r.system_id) {
                    systems.push(r.system_id.clone());
                }
            }
            for s in systems {
                for c in Criterion::ALL {
                    if let Ok(sh) = quality_shares(&records, &s, c) {
                        out.push((s.clone(), c, sh));
                    }
                }
            }
        }
    }
    Ok(out)
}


#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareRow {
    pub system_id: String,
    pub criterion: Criterion,
    pub grade: Grade,
    pub count: u64,
    pub n: u64,
    pub share: f64,
    pub se: f64,
    /// Percentage and its +/- at one decimal, as printed.
    pub pct: String,
    pub pm: String,
}

pub fn share_rows(src: &ShareSource, system: Option<&str>, criterion: Option<Criterion>) -> Result<Vec<ShareRow>> {
    let mut rows = Vec::new();
    for (s, c, shares) in share_table(src)? {
        if system.is_some_and(|x| x != s) || criterion.is_some_and(|x| x != c) {
            continue;
        }
        for (g, e) in shares {
            rows.push(ShareRow {
                system_id: s.clone(),
                criterion: c,
                grade: g,
                count: e.count(),
                n: e.n,
                share: e.share,
                se: e.se,
                pct: format!("{:.1}", e.share * 100.0),
                pm: format!("{:.1}", e.se * 100.0),
            });
        }
    }
    Ok(rows)
}

pub fn stats_shares(src: &ShareSource, system: Option<&str>, criterion: Option<Criterion>, as_json: bool) -> Result<Outcome> {
    let rows = share_rows(src, system, criterion)?;
    if rows.is_empty() {
        return Err(fail("no matching shares"));
    }
    if as_json {
        return Ok(Outcome::ok(json_lines(&rows)));
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.system_id.clone(),
                r.criterion.as_str().to_string(),
                format!("{:?}", r.grade),
                format!("{}/{}", r.count, r.n),
                r.pct.clone(),
                format!("± {}", r.pm),
            ]
        })
        .collect();
    Ok(Outcome::ok(table(&["system", "criterion", "grade", "count", "%", "se"], &cells)))
}


#[derive(Debug, Clone)]
pub enum ZInput {
    Counts { x1: u64, n1: u64, x2: u64, n2: u64 },
    /// Overall Good of two systems in a count fixture.
    Systems { counts: PathBuf, a: String, b: String },
}

pub fn stats_ztest(input: &ZInput, as_json: bool) -> Result<Outcome> {
    let (x1, n1, x2, n2, label) = match input {
        ZInput::Counts { x1, n1, x2, n2 } => (*x1, *n1, *x2, *n2, "sample 1 vs sample 2".to_string()),
        ZInput::Systems { counts, a, b } => {
            let cf = load_counts(counts)?;
            let good = |id: &str| -> Result<u64> {
                cf.system(id)
                    .and_then(|s| s.criteria.get(&Criterion::Overall))
                    .and_then(|c| c.0.get(&Grade::Good).copied())
                    .ok_or_else(|| fail(format!("no overall Good count for `{id}`")))
            };
            (good(a)?, cf.n, good(b)?, cf.n, format!("{a} vs {b}, overall Good"))
        }
    };
    let r = two_prop_z_one_sided(x1, n1, x2, n2).map_err(fail)?;
    if as_json {
        let row = json!({ "x1": x1, "n1": n1, "x2": x2, "n2": n2, "z": r.z, "p_one_sided": r.p_one_sided });
        return Ok(Outcome::ok(row.to_string() + "\n"));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{label}: {x1}/{n1} vs {x2}/{n2}");
    let _ = writeln!(s, "z = {:.4}", r.z);
    let _ = writeln!(s, "p (one-sided) = {:.6}", r.p_one_sided);
    Ok(Outcome::ok(s))
}


#[derive(Debug, Clone)]
pub enum SummarySource {
    Fixture(PathBuf),
    Results { path: PathBuf, boot: usize, seed: u64 },
}

fn summaries(src: &SummarySource) -> Result<Vec<SummaryRow>> {
    match src {
        SummarySource::Fixture(p) => load_summary(p),
        SummarySource::Results { path, boot, seed } => {
            let records = load_results(path)?;
            let mut ids: Vec<String> = Vec::new();
            for r in &records {
                if !ids.contains(&r.system_id) {
                    ids.push(r.system_id.clone());
                }
            }
            ids.iter()
                .map(|id| summarize_time_price(&records, id, *boot, *seed).map_err(fail))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeCheck {
    pub system_id: String,
    pub avg_connect_plus_exec: f64,
    pub avg_total: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reduction {
    pub metric: String,
    pub system_id: String,
    pub baseline: String,
    pub value: f64,
    pub baseline_value: f64,
    /// `1 - value / baseline_value`.
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub rows: Vec<SummaryRow>,
    pub time_checks: Vec<TimeCheck>,
    pub reductions: Vec<Reduction>,
}

pub fn summary_report(src: &SummarySource, system: &str, baseline: &str) -> Result<SummaryReport> {
    let rows = summaries(src)?;
    let time_checks = rows
        .iter()
        .map(|r| TimeCheck {
            system_id: r.system_id.clone(),
            avg_connect_plus_exec: r.connect.avg + r.exec.avg,
            avg_total: r.total.avg,
            diff: r.connect.avg + r.exec.avg - r.total.avg,
        })
        .collect();
    let find = |id: &str| rows.iter().find(|r| r.system_id == id);
    let mut reductions = Vec::new();
    if let (Some(a), Some(b)) = (find(system), find(baseline)) {
        let mut push = |metric: &str, x: f64, y: f64| {
            reductions.push(Reduction {
                metric: metric.into(),
                system_id: a.system_id.clone(),
                baseline: b.system_id.clone(),
                value: x,
                baseline_value: y,
                reduction: reduction(x, y),
            })
        };
        push("median_total_h", a.total.median, b.total.median);
        if let (Some(pa), Some(pb)) = (a.price, b.price) {
            push("median_price_usd", pa.median, pb.median);
        }
    }
    Ok(SummaryReport {
        rows,
        time_checks,
        reductions,
    })
}

pub fn stats_summary(src: &SummarySource, system: &str, baseline: &str, as_json: bool) -> Result<Outcome> {
    let report = summary_report(src, system, baseline)?;
    if as_json {
        return Ok(Outcome::ok(serde_json::to_string(&report).expect("report serializes") + "\n"));
    }
    let m = |x: &gatework_stats::Metric| (format!("{:.1} ± {:.1}", x.avg, x.avg_sd), format!("{:.2} ± {:.1}", x.median, x.median_boot_se));
    let mut cells = Vec::new();
    for r in &report.rows {
        for (name, metric) in [("price_usd", r.price), ("connect_h", Some(r.connect)), ("exec_h", Some(r.exec)), ("total_h", Some(r.total))] {
            let (avg, med) = metric.as_ref().map(m).unwrap_or_else(|| ("n/a".into(), "n/a".into()));
            cells.push(vec![r.system_id.clone(), name.to_string(), avg, med]);
        }
    }
    let mut s = table(&["system", "metric", "avg ± sd", "median ± se"], &cells);
    s.push('\n');
    for c in &report.time_checks {
        let _ = writeln!(
            s,
            "{}: connect + exec = {:.1} h, total = {:.1} h (diff {:+.2})",
            c.system_id, c.avg_connect_plus_exec, c.avg_total, c.diff
        );
    }
    for r in &report.reductions {
        let _ = writeln!(
            s,
            "{} reduction, {} vs {}: 1 - {:.2}/{:.2} = {:.0}%",
            r.metric,
            r.system_id,
            r.baseline,
            r.value,
            r.baseline_value,
            r.reduction * 100.0
        );
    }
    Ok(Outcome::ok(s))
}


pub fn stats_frontier(summary: &SummarySource, shares: &ShareSource, as_json: bool) -> Result<Outcome> {
    let rows = summaries(summary)?;
    let good: BTreeMap<String, ShareEstimate> = share_table(shares)?
        .into_iter()
        .filter(|(_, c, _)| *c == Criterion::Overall)
        .filter_map(|(s, _, m)| m.get(&Grade::Good).map(|e| (s, *e)))
        .collect();
    let points = frontier_points(&rows, &good).map_err(fail)?;
    if as_json {
        let rows: Vec<_> = points
            .iter()
            .map(|p| {
                let (h, g) = p.display_pair();
                json!({ "system_id": p.system_id, "median_total_h": h.parse::<f64>().unwrap(), "pct_good": g.parse::<f64>().unwrap() })
            })
            .collect();
        return Ok(Outcome::ok(json_lines(&rows)));
    }
    let cells: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let (h, g) = p.display_pair();
            vec![p.system_id.clone(), h, g]
        })
        .collect();
    Ok(Outcome::ok(table(&["system", "median total h", "% good"], &cells)))
}


pub fn validate_dataset(manifest: &Path, as_json: bool) -> Result<Outcome> {
    let ds = load_benchmark(manifest).map_err(fail)?;
    let report = validate_distribution(&ds);
    let mut out = Outcome::ok(String::new());
    if as_json {
        out.stdout = serde_json::to_string(&report).expect("report serializes") + "\n";
    } else {
        let _ = writeln!(out.stdout, "tasks {} (expected {})", report.total, report.expected_total);
        let areas: Vec<String> = report.area_counts.iter().map(|(a, n)| format!("{a} {n}")).collect();
        let _ = writeln!(out.stdout, "areas {}", areas.join(" / "));
    }
    for m in &report.mismatches {
        let _ = writeln!(out.stderr, "mismatch {m}");
    }
    if report.total != report.expected_total {
        let _ = writeln!(out.stderr, "mismatch (total: {} vs {})", report.total, report.expected_total);
    }
    if !report.ok() {
        out.code = 1;
    }
    Ok(out)
}


/// Rebuild a task from its event file without modifying it. A torn final
/// line is ignored, as the service would on startup.
pub fn replay_task(layout: &Layout, task_id: &str, as_json: bool) -> Result<Outcome> {
    let path = layout.events(task_id);
    if !path.is_file() {
        return Err(fail(format!("no event file for task `{task_id}` at {}", path.display())));
    }
    let text = read(&path)?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let log = AuditLog::from_jsonl(complete).map_err(fail)?;
    let run = TaskRun::from_log(task_id, log).map_err(fail)?;
    let state_json = serde_json::to_string(&run.state).expect("state serializes");
    let hash = sha256_hex(state_json.as_bytes());
    if as_json {
        let v = json!({ "task_id": task_id, "state": run.state, "plan": run.plan, "pending_gates": run.pending_gates(), "state_sha256": hash });
        return Ok(Outcome::ok(v.to_string() + "\n"));
    }
    let start = run.log.events().first().map_or(0, |e| e.wall_time);
    let cells: Vec<Vec<String>> = run
        .log
        .events()
        .iter()
        .map(|e| {
            vec![
                e.seq.to_string(),
                format!("{:.1}s", (e.wall_time - start) as f64 / 1000.0),
                serde_json::to_value(e.actor).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                format!("{:?}", e.kind),
            ]
        })
        .collect();
    let mut s = table(&["seq", "elapsed", "actor", "event"], &cells);
    let _ = writeln!(s, "\nphase {:?}  version {}  state sha256 {hash}", run.state.phase, run.state.version);
    for g in run.pending_gates() {
        let _ = writeln!(s, "pending gate {} ({})", g.gate_id, g.gate_kind);
    }
    Ok(Outcome::ok(s))
}
