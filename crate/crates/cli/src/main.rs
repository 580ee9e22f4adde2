mod files;
mod trial;

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covbal_api::{AllocateRequest, MetricsRequest, SimulateRequest};
use covbal_client::{Client, ClientError};
use covbal_core::metrics::MetricReport;
use covbal_core::simulator::{
    allocate_dataset, load_dataset, simulate, write_records_csv, Dataset, SimulationPlan, SummaryDocument,
};
use covbal_core::trial_core::{Method, MethodConfig};
use covbal_service::{SeedPolicy, Server, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "covbal",
    version,
    about = "Covariate-adaptive randomization: simulation, allocation, balance metrics and a live-trial service"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method repeatedly on a dataset and summarize balance and predictability.
    Simulate(SimulateArgs),
    /// Allocate a dataset once, subjects arriving in file order.
    Allocate(AllocateArgs),
    /// Balance metrics for an existing allocation.
    Metrics(MetricsArgs),
    /// Run the allocation service.
    Serve(ServeArgs),
    /// Talk to a running service about live trials.
    #[command(subcommand)]
    Trial(trial::TrialCommand),
}

#[derive(Args)]
struct MethodParams {
    /// Method parameter `key=value`, repeatable. Keys: p0 (0.8), c (3), rho (6),
    /// gamma (0.5:4), n0 (8), block_size (4). Prefix a key with a method to
    /// scope it, e.g. `bkw.rho=4`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Covariate CSV: header row, optional leading id column.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "ps,nt,mh,bkw")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    replicates: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for records.csv and summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to one per core). Results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Keep the file order of subjects instead of reshuffling it per replicate.
    #[arg(long)]
    fixed_order: bool,
    #[command(flatten)]
    params: MethodParams,
    /// Run on a service instead of in-process.
    #[arg(long, env = "COVBAL_SERVER")]
    server: Option<String>,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: MethodParams,
    #[arg(long, env = "COVBAL_SERVER")]
    server: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV with `subject_id` and `group` (1 or 2) columns, rows in allocation order.
    #[arg(long)]
    allocation: PathBuf,
    /// Covariate CSV the allocation refers to.
    #[arg(long)]
    data: PathBuf,
    /// Length of the permuted-block phase; correct guesses are scored after it.
    #[arg(long, default_value_t = 8)]
    n0: usize,
    /// Permutation replicates for the energy-distance p-value.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    permutations: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report on raw covariates rather than z-scores.
    #[arg(long)]
    raw_scale: bool,
    #[arg(long, env = "COVBAL_SERVER")]
    server: Option<String>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "COVBAL_LISTEN", default_value = "127.0.0.1:8077")]
    listen: SocketAddr,
    #[arg(long, env = "COVBAL_DATA_DIR", default_value = "covbal-data")]
    data_dir: PathBuf,
    /// Seed for trials created without one: `random` or `fixed:<integer>`.
    #[arg(long, env = "COVBAL_SEED_POLICY", default_value = "random")]
    seed_policy: SeedPolicy,
    /// Directory of static files to serve alongside the API.
    #[arg(long, env = "COVBAL_CONSOLE_DIR")]
    console_dir: Option<PathBuf>,
}

/// Exit status 1 for domain failures, 2 for usage errors.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl From<covbal_core::Error> for CliError {
    fn from(e: covbal_core::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<covbal_service::ServiceError> for CliError {
    fn from(e: covbal_service::ServiceError) -> Self {
        CliError::Domain(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Apply `--param` flags. A key prefixed with a method name applies only to
/// that method.
pub fn apply_params(configs: &mut [MethodConfig], params: &[String]) -> CliResult<()> {
    for raw in params {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got {raw:?}")))?;
        let (scope, key) = match key.split_once('.') {
            Some((m, k)) => {
                let m: Method = m
                    .parse()
                    .map_err(|e: covbal_core::Error| CliError::Usage(e.to_string()))?;
                (Some(m), k)
            }
            None => (None, key),
        };
        if matches!(key.trim(), "n" | "target_n") {
            return Err(CliError::Usage(
                "the trial size comes from the dataset; do not set n".into(),
            ));
        }
        for c in configs.iter_mut().filter(|c| scope.is_none_or(|m| m == c.method)) {
            c.set_param(key, value)
                .map_err(|e| CliError::Usage(format!("--param {raw}: {e}")))?;
        }
    }
    Ok(())
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Runtime::new()?)
}

fn open_out(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let dataset = load_dataset(&a.data)?;
    let n = dataset.matrix.n_rows();
    let mut methods: Vec<MethodConfig> = a.methods.iter().map(|&m| MethodConfig::new(m, n)).collect();
    apply_params(&mut methods, &a.params.params)?;
    let mut plan = SimulationPlan::new(dataset, methods, a.replicates as usize, a.seed);
    plan.shuffle_arrivals = !a.fixed_order;
    plan.jobs = a.jobs.map(|j| j as usize);

    let (records, summary) = match &a.server {
        None => {
            let records = simulate(&plan)?;
            let summary = SummaryDocument::build(&plan, &records);
            (records, summary)
        }
        Some(url) => {
            let req = SimulateRequest {
                dataset: files::payload(&plan.dataset),
                methods: plan.methods.clone(),
                replicates: plan.replicates,
                seed: plan.seed,
                shuffle_arrivals: plan.shuffle_arrivals,
                jobs: plan.jobs,
            };
            let resp = runtime()?.block_on(Client::new(url).simulate(&req))?;
            (resp.records, resp.summary)
        }
    };

    fs::create_dir_all(&a.out)?;
    let records_path = a.out.join("records.csv");
    write_records_csv(&records, io::BufWriter::new(fs::File::create(&records_path)?))?;
    let summary_path = a.out.join("summary.json");
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    emit(&format!(
        "{}{} records ({failed} failed) -> {}, {}\n",
        files::radar_table(&summary),
        records.len(),
        records_path.display(),
        summary_path.display()
    ))
}

fn cmd_allocate(a: AllocateArgs) -> CliResult<()> {
    let dataset = load_dataset(&a.data)?;
    let mut config = [MethodConfig::new(a.method, dataset.matrix.n_rows())];
    apply_params(&mut config, &a.params.params)?;
    let [config] = config;
    let records = match &a.server {
        None => allocate_dataset(&dataset, &config, a.seed)?,
        Some(url) => {
            let req = AllocateRequest {
                dataset: files::payload(&dataset),
                config,
                seed: a.seed,
            };
            runtime()?.block_on(Client::new(url).allocate(&req))?.records
        }
    };
    files::write_allocation(&records, open_out(a.out.as_ref())?)
}

fn cmd_metrics(a: MetricsArgs) -> CliResult<()> {
    let dataset = load_dataset(&a.data)?;
    let allocation = files::read_allocation(&a.allocation)?;
    let (ordered, groups) = files::align(&dataset, &allocation)?;
    let permutations = a.permutations.map(|r| r as usize);
    let report: MetricReport = match &a.server {
        None => MetricReport::for_dataset(&ordered, &groups, a.n0, permutations, a.seed, a.raw_scale)?,
        Some(url) => {
            let req = MetricsRequest {
                dataset: files::payload(&Dataset {
                    ids: None,
                    matrix: ordered,
                }),
                groups,
                n0: a.n0,
                permutations,
                seed: a.seed,
                raw_scale: a.raw_scale,
            };
            runtime()?.block_on(Client::new(url).metrics(&req))?
        }
    };
    if report.n1 == 0 || report.n2 == 0 {
        eprintln!("warning: one group is empty; energy distance is not reported");
    }
    emit(&(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn cmd_serve(a: ServeArgs) -> CliResult<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "covbal_service=info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let config = ServiceConfig {
        listen: a.listen,
        data_dir: a.data_dir,
        seed_policy: a.seed_policy,
        console_dir: a.console_dir,
    };
    runtime()?.block_on(async move {
        let server = Server::bind(&config).await?;
        let addr = server.local_addr()?;
        // Scripts and tests read the bound address from this line.
        println!("listening on http://{addr}");
        io::stdout().flush()?;
        server.run(shutdown_signal()).await?;
        Ok(())
    })
}

/// Write to stdout. A reader that closed the pipe early (`covbal ... | head`)
/// is not an error.
pub(crate) fn emit(text: &str) -> CliResult<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Allocate(a) => cmd_allocate(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Trial(t) => trial::run(t),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(m)) => {
            eprintln!("covbal: error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(m)) => {
            eprintln!("covbal: usage error: {m}");
            ExitCode::from(2)
        }
    }
}
