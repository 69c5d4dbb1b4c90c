use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use gatework::commands::{self, Outcome, ShareSource, SimulateArgs, SummarySource, ZInput};
use gatework::{router, Layout, Store, StoreConfig, SystemClock, ROOT_ENV};
use gatework_sim::Regime;
use gatework_stats::Criterion;

#[derive(Parser)]
#[command(name = "gatework", version, about = "Hybrid human/AI task service, simulator and statistics")]
struct Cli {
    /// Store root. The GATEWORK_ROOT environment variable takes precedence.
    #[arg(long, global = true, default_value = ".")]
    root: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Template library (defaults to the built-in one).
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Worker pool (defaults to the built-in one).
        #[arg(long)]
        workers: Option<PathBuf>,
        /// Static console files served under /console (default: <root>/console if present).
        #[arg(long)]
        console_dir: Option<PathBuf>,
    },
    /// Run the discrete-event simulator.
    Simulate {
        #[arg(long, default_value = "config/calibration.toml")]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_tasks: Option<u64>,
        #[arg(long)]
        regime: Option<Regime>,
        /// Output directory (default: <root>/runs/<run-id>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel drivers; output does not depend on it.
        #[arg(long, default_value_t = 1)]
        drivers: usize,
    },
    /// Statistics over count fixtures, summaries or results files.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Check a benchmark manifest against the reference distribution.
    ValidateDataset {
        /// Manifest path (default: <root>/datasets/benchmark/manifest.jsonl).
        manifest: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Rebuild a task from its event file and print its timeline.
    Replay {
        task_id: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ShareInput {
    /// Label count fixture.
    #[arg(long, default_value = "fixtures/published/quality_counts.json")]
    counts: PathBuf,
    /// Results file (labelled results or simulator records); overrides --counts.
    #[arg(long)]
    results: Option<PathBuf>,
}

impl ShareInput {
    fn source(&self) -> ShareSource {
        match &self.results {
            Some(p) => ShareSource::Results(p.clone()),
            None => ShareSource::Counts(self.counts.clone()),
        }
    }
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Grade shares with binomial standard errors.
    Shares {
        #[command(flatten)]
        input: ShareInput,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        criterion: Option<Criterion>,
        #[arg(long)]
        json: bool,
    },
    /// One-sided pooled two-proportion z-test.
    Ztest {
        #[arg(long, requires_all = ["n1", "x2", "n2"])]
        x1: Option<u64>,
        #[arg(long)]
        n1: Option<u64>,
        #[arg(long)]
        x2: Option<u64>,
        #[arg(long)]
        n2: Option<u64>,
        #[arg(long, default_value = "fixtures/published/quality_counts.json")]
        counts: PathBuf,
        #[arg(long, default_value = "hybrid")]
        a: String,
        #[arg(long, default_value = "human_only")]
        b: String,
        #[arg(long)]
        json: bool,
    },
    /// Time and price averages and medians, sum checks and reductions.
    Summary {
        #[arg(long, default_value = "fixtures/published/time_price_summary.json")]
        summary: PathBuf,
        /// Results file to summarize instead of the fixture.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, default_value = "hybrid")]
        system: String,
        #[arg(long, default_value = "human_only")]
        baseline: String,
        /// Bootstrap resamples for medians.
        #[arg(long, default_value_t = gatework_stats::DEFAULT_B)]
        boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Median total hours against percent Good, one point per system.
    Frontier {
        #[arg(long, default_value = "fixtures/published/time_price_summary.json")]
        summary: PathBuf,
        #[command(flatten)]
        input: ShareInput,
        #[arg(long)]
        json: bool,
    },
}

fn root(cli_root: &Path) -> PathBuf {
    std::env::var_os(ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| cli_root.to_path_buf())
}

fn emit(r: Result<Outcome, commands::CommandError>) -> ExitCode {
    match r {
        Ok(o) => {
            print!("{}", o.stdout);
            eprint!("{}", o.stderr);
            ExitCode::from(o.code.clamp(0, 255) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn serve(root: PathBuf, host: &str, port: u16, templates: Option<PathBuf>, workers: Option<PathBuf>, console: Option<PathBuf>) -> Result<(), String> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let config = match (templates, workers) {
        (None, None) => StoreConfig::builtin(),
        (t, w) => {
            let t = t.map(|p| read(&p)).transpose()?;
            let w = w.map(|p| read(&p)).transpose()?;
            StoreConfig::from_texts(
                t.as_deref().unwrap_or(gatework::store::BUILTIN_TEMPLATES),
                w.as_deref().unwrap_or(gatework::store::BUILTIN_WORKERS),
            )
            .map_err(|e| e.to_string())?
        }
    };
    let store = Store::open(&root, config, Arc::new(SystemClock)).map_err(|e| e.to_string())?;
    let console = console.or_else(|| Some(root.join("console")).filter(|p| p.is_dir()));
    let app = router(Arc::new(store), console);
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| format!("{host}:{port}: {e}"))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("{addr}: {e}"))?;
        let local = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on http://{local}");
        use std::io::Write;
        let _ = std::io::stdout().flush();
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let layout = Layout::new(root(&cli.root));
    match cli.cmd {
        Cmd::Serve {
            port,
            host,
            templates,
            workers,
            console_dir,
        } => match serve(layout.root.clone(), &host, port, templates, workers, console_dir) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Cmd::Simulate {
            config,
            seed,
            n_tasks,
            regime,
            out,
            drivers,
        } => emit(commands::simulate(
            &layout,
            &SimulateArgs {
                config,
                seed,
                n_tasks,
                regime,
                out,
                drivers,
            },
        )),
        Cmd::Stats(s) => emit(match s {
            StatsCmd::Shares {
                input,
                system,
                criterion,
                json,
            } => commands::stats_shares(&input.source(), system.as_deref(), criterion, json),
            StatsCmd::Ztest {
                x1,
                n1,
                x2,
                n2,
                counts,
                a,
                b,
                json,
            } => {
                let input = match (x1, n1, x2, n2) {
                    (Some(x1), Some(n1), Some(x2), Some(n2)) => ZInput::Counts { x1, n1, x2, n2 },
                    _ => ZInput::Systems { counts, a, b },
                };
                commands::stats_ztest(&input, json)
            }
            StatsCmd::Summary {
                summary,
                results,
                system,
                baseline,
                boot,
                seed,
                json,
            } => {
                let src = match results {
                    Some(path) => SummarySource::Results { path, boot, seed },
                    None => SummarySource::Fixture(summary),
                };
                commands::stats_summary(&src, &system, &baseline, json)
            }
            StatsCmd::Frontier { summary, input, json } => {
                let src = match &input.results {
                    Some(path) => SummarySource::Results {
                        path: path.clone(),
                        boot: gatework_stats::DEFAULT_B,
                        seed: 0,
                    },
                    None => SummarySource::Fixture(summary),
                };
                commands::stats_frontier(&src, &input.source(), json)
            }
        }),
        Cmd::ValidateDataset { manifest, json } => {
            let manifest = manifest.unwrap_or_else(|| layout.datasets().join("benchmark").join("manifest.jsonl"));
            emit(commands::validate_dataset(&manifest, json))
        }
        Cmd::Replay { task_id, json } => emit(commands::replay_task(&layout, &task_id, json)),
    }
}
