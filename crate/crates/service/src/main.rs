use std::error::Error;
use std::fs::{self, File};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse::bench::{prepare, run_experiment, selection_timing, write_raw_csv, write_timing_csv, DatasetRef, ExperimentConfig, Method};
use recourse::elicit::{gen_truth_random, run_session, SessionConfig, SimulatedResponder, Strategy};
use recourse::service::{DatasetEntry, RecourseRequest, SessionStore};
use recourse::CostMatrix;
use recourse_service::{csv_entry, router, synthetic_entry, Options};

type Result<T> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

#[derive(Parser)]
#[command(name = "recourse", version, about = "Cost elicitation and robust recourse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP session API.
    Serve(ServeArgs),
    /// Run an experiment config and write the reports.
    Bench(BenchArgs),
    /// One simulated session; prints the transcript as JSON.
    ElicitSim(SimArgs),
    /// One plan from a session event log.
    Recourse(RecourseArgs),
}

/// Dataset selection shared by the subcommands.
#[derive(Args, Clone)]
struct DataArgs {
    /// Rows of the synthetic dataset.
    #[arg(long, default_value_t = 2000)]
    synthetic_n: usize,
    /// Extra CSV dataset as `ID=DATA.csv,SCHEMA.json`; repeatable.
    #[arg(long = "dataset", value_name = "ID=CSV,SCHEMA")]
    datasets: Vec<String>,
    /// Seeds data generation, splits and classifier training.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DataArgs {
    fn entries(&self) -> Result<Vec<DatasetEntry>> {
        let mut out = vec![synthetic_entry(self.synthetic_n, self.seed)?];
        for spec in &self.datasets {
            let (id, paths) = spec.split_once('=').ok_or("expected ID=CSV,SCHEMA")?;
            let (csv, schema) = paths.split_once(',').ok_or("expected ID=CSV,SCHEMA")?;
            out.push(csv_entry(id, csv.as_ref(), schema.as_ref(), self.seed)?);
        }
        Ok(out)
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory of the per-session event logs.
    #[arg(long, default_value = "sessions")]
    log_dir: PathBuf,
    /// Static UI bundle to serve under `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Require this value in the `x-api-key` header.
    #[arg(long, env = "RECOURSE_API_KEY")]
    api_key: Option<String>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// ExperimentConfig as JSON; fields left out take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    t_values: Option<Vec<usize>>,
    #[arg(long)]
    truths: Option<usize>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Any of rank, grad, wachter, graph, face, graph-worst-case.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    k: Option<usize>,
    /// Fill the `time_ms` column.
    #[arg(long)]
    record_time: bool,
    /// Also time exhaustive against similar-cost selection at these pool sizes.
    #[arg(long, value_delimiter = ',')]
    timing_sizes: Option<Vec<usize>>,
}

#[derive(Args)]
struct SimArgs {
    /// Position among the dataset's rejected test subjects.
    #[arg(long, default_value_t = 0)]
    subject: usize,
    #[arg(long, default_value_t = 5)]
    budget: usize,
    #[arg(long, default_value = "similar2")]
    strategy: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = recourse::DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Ground truth as a JSON matrix; random when absent.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    indiff_band: f64,
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, requires = "csv")]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    synthetic_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RecourseArgs {
    /// Event log written by `serve`.
    #[arg(long)]
    session: PathBuf,
    /// grad, graph or graph-worst-case.
    #[arg(long, default_value = "graph")]
    method: String,
    /// Must match the flags the session was served with.
    #[command(flatten)]
    data: DataArgs,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve(args) => serve(args),
        Command::Bench(args) => bench(args),
        Command::ElicitSim(args) => elicit_sim(args),
        Command::Recourse(args) => recourse_once(args),
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt().init();
    let store = Arc::new(SessionStore::open(&args.log_dir, args.data.entries()?)?);
    tracing::info!(sessions = store.session_ids().len(), log_dir = %args.log_dir.display(), "store loaded");
    let app = router(
        store,
        Options {
            api_key: args.api_key,
            static_dir: args.static_dir,
        },
    )
    .layer(tower_http::trace::TraceLayer::new_for_http());
    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr).await?;
        tracing::info!(addr = %args.addr, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.t_values {
        cfg.t_values = v;
    }
    if let Some(v) = args.truths {
        cfg.num_truth_matrices = v;
    }
    if let Some(v) = args.subjects {
        cfg.num_subjects = v;
    }
    if let Some(v) = args.strategies {
        cfg.strategies = v;
    }
    if let Some(v) = args.methods {
        cfg.methods = v.iter().map(|m| Method::parse(m)).collect::<std::result::Result<_, _>>()?;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    cfg.record_time |= args.record_time;

    fs::create_dir_all(&args.out)?;
    let (report, rows) = run_experiment(&cfg)?;
    write_raw_csv(&rows, File::create(args.out.join("raw.csv"))?)?;
    report.write_csv(File::create(args.out.join("summary.csv"))?)?;
    report.write_plot_csv(File::create(args.out.join("plot.csv"))?)?;
    report.write_comparisons_csv(File::create(args.out.join("comparisons.csv"))?)?;
    fs::write(args.out.join("report.json"), report.to_json()?)?;
    fs::write(args.out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    if let Some(sizes) = args.timing_sizes {
        let timing = selection_timing(&sizes, None, cfg.seed)?;
        write_timing_csv(&timing, File::create(args.out.join("timing.csv"))?)?;
    }
    for c in &report.comparisons {
        let p = c.p_value.map(|p| format!("{p:.3e}")).unwrap_or_else(|| "n/a".into());
        println!(
            "{} {} T={} {}: {} vs {} mean diff {:+.4e}, one-sided p {p}",
            c.dataset,
            c.strategy,
            c.t,
            c.metric,
            c.method,
            c.baseline,
            c.mean_difference.unwrap_or(f64::NAN)
        );
    }
    eprintln!("{} rows written to {}", rows.len(), args.out.display());
    Ok(())
}

fn elicit_sim(args: SimArgs) -> Result<()> {
    let dataset = match (&args.csv, &args.schema) {
        (Some(path), Some(schema)) => DatasetRef::Csv {
            path: path.clone(),
            schema: schema.clone(),
        },
        (Some(_), None) => return Err("--csv needs --schema".into()),
        _ => DatasetRef::Synthetic { n: args.synthetic_n },
    };
    let cfg = ExperimentConfig {
        dataset,
        seed: args.seed,
        ..ExperimentConfig::default()
    };
    let prepared = prepare(&cfg)?;
    let x0 = prepared
        .subjects
        .get(args.subject)
        .ok_or_else(|| format!("only {} rejected subjects", prepared.subjects.len()))?
        .clone();
    let truth: CostMatrix = match &args.truth {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => gen_truth_random(x0.dim(), &mut ChaCha8Rng::seed_from_u64(args.seed)),
    };
    let config = SessionConfig {
        budget: args.budget,
        strategy: Strategy::from_name(&args.strategy, args.k)?,
        margin: args.margin,
        tolerance: args.tolerance,
        seed: args.seed,
    };
    let mut responder = SimulatedResponder::new(truth, args.indiff_band, args.flip_prob, args.seed);
    let session = run_session(x0, prepared.pool, config, &mut responder)?;
    println!("{}", serde_json::to_string_pretty(session.transcript())?);
    Ok(())
}

fn recourse_once(args: RecourseArgs) -> Result<()> {
    let store = SessionStore::new(args.data.entries()?);
    let record = store.import(&args.session)?;
    let plan = store.request_recourse(&record.session_id, RecourseRequest { method: args.method })?;
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(())
}
