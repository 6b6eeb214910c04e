//! Command-line entry points.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use revealq_core::harness::{run_experiment, run_sweep, ExperimentConfig, SweepParameter};
use revealq_core::output::write_experiment;

use crate::config::load_config;
use crate::session::SessionSettings;
use crate::store::{SessionStore, StoreOptions};

/// Boxed errors are enough at the process boundary.
pub type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

/// Overrides the default results and session directory.
pub const DATA_DIR_ENV: &str = "REVEALQ_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "revealq",
    version,
    about = "Teach a robot your preferences by answering comparison questions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured strategy over simulated users.
    Simulate(RunArgs),
    /// Repeat a simulation over values of lambda or k.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `lambda` or `k`.
        #[arg(long)]
        parameter: SweepParameter,
        /// Comma-separated values, e.g. `0.5,1,10`.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
    },
    /// Host live teaching sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `$REVEALQ_DATA_DIR` or `./results`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// JSON experiment config supplying pool, candidate and particle sizes.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Session directory; defaults to `$REVEALQ_DATA_DIR/sessions` or `./sessions`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Serve the observer-model view at `/sessions/{id}/debug`.
    #[arg(long)]
    pub debug_panel: bool,
    /// Idle seconds before an active session expires; 0 disables expiry.
    #[arg(long, default_value_t = 86_400)]
    pub idle_timeout: u64,
}

fn data_dir(explicit: Option<&Path>, fallback: &str, nested: Option<&str>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(base) => {
            let base = PathBuf::from(base);
            nested.map(|n| base.join(n)).unwrap_or(base)
        }
        None => PathBuf::from(fallback),
    }
}

impl RunArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut config = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn out_dir(&self) -> PathBuf {
        data_dir(self.out.as_deref(), "results", None)
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.parallelism {
            if n == 0 {
                return Err("--parallelism must be at least 1".into());
            }
            builder = builder.num_threads(n);
        }
        Ok(builder.build()?)
    }
}

pub fn simulate(args: &RunArgs) -> CliResult<PathBuf> {
    let config = args.load()?;
    let result = args.pool()?.install(|| run_experiment(&config))?;
    if !result.failures.is_empty() {
        eprintln!("warning: {} cells failed and were excluded", result.failures.len());
    }
    let paths = write_experiment(&args.out_dir(), &config, &result)?;
    Ok(paths.aggregate)
}

pub fn sweep(args: &RunArgs, parameter: SweepParameter, values: &[f64]) -> CliResult<Vec<PathBuf>> {
    let config = args.load()?;
    let points = args.pool()?.install(|| run_sweep(&config, parameter, values))?;
    let root = args.out_dir();
    let mut written = Vec::with_capacity(points.len());
    for p in &points {
        let dir = root.join(format!("{}={}", parameter.name(), p.value));
        let applied = parameter.apply(&config, p.value)?;
        written.push(write_experiment(&dir, &applied, &p.result)?.aggregate);
    }
    Ok(written)
}

pub fn open_store(args: &ServeArgs) -> CliResult<SessionStore> {
    let settings = match &args.config {
        Some(path) => SessionSettings::from_config(&load_config(path)?),
        None => SessionSettings::default(),
    };
    let options = StoreOptions {
        settings,
        debug_panel: args.debug_panel,
        idle_timeout: (args.idle_timeout > 0).then(|| Duration::from_secs(args.idle_timeout)),
    };
    let dir = data_dir(args.data_dir.as_deref(), "sessions", Some("sessions"));
    Ok(SessionStore::open(dir, options)?)
}

pub async fn serve(args: &ServeArgs) -> CliResult<()> {
    let store = Arc::new(open_store(args)?);
    let listener = tokio::net::TcpListener::bind(&args.bind)
        .await
        .map_err(|e| format!("cannot bind {}: {e}", args.bind))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, crate::api::router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Simulate(args) => simulate(args).map(|p| println!("{}", p.display())),
        Command::Sweep { run, parameter, values } => sweep(run, *parameter, values).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
        Command::Serve(args) => tokio::runtime::Runtime::new()
            .map_err(Into::into)
            .and_then(|rt| rt.block_on(serve(args))),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
