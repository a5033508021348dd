use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use wmeval_cli::commands;
use wmeval_core::protocol::Role;
use wmeval_core::store::RunStore;

#[derive(Parser)]
#[command(
    name = "wmeval",
    version,
    about = "Evaluate policies against world-model backends"
)]
struct Cli {
    /// Store root directory [default: the manifest's output_dir, else ./store].
    #[arg(long, global = true, env = "WMEVAL_STORE")]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the campaign described by a manifest.
    Run {
        manifest: PathBuf,
        /// Re-classify rollouts that already have an outcome.
        #[arg(long)]
        force_classify: bool,
    },
    /// Label every rollout of a run with its classifier.
    Classify {
        #[arg(long)]
        run: String,
        #[arg(long)]
        force: bool,
    },
    /// Attach a real-robot results CSV to a run.
    IngestReal {
        csv: PathBuf,
        #[arg(long)]
        run: String,
    },
    /// Compute and save the run report; prints the CSV summary.
    Report {
        #[arg(long)]
        run: String,
        /// Print the full JSON report instead of the CSV summary.
        #[arg(long)]
        json: bool,
    },
    /// Serve a built-in mock backend over the wire protocol.
    ServeMock {
        #[arg(long)]
        role: Role,
        #[arg(long)]
        port: u16,
        /// JSON object of mock parameters (may include `kind`).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Mock kind, e.g. `zero`, `proportional`, `sandbox`, `oracle`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Serve the rater HTTP API for a run.
    ServeApi {
        #[arg(long)]
        run: String,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Per-frame L1/SSIM between two `.vframes` videos, as CSV.
    Fidelity { generated: PathBuf, truth: PathBuf },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let store = RunStore::new(
        cli.store
            .clone()
            .unwrap_or_else(|| PathBuf::from(commands::DEFAULT_STORE)),
    );
    match cli.command {
        Command::Run {
            manifest,
            force_classify,
        } => {
            let loaded = commands::load_manifest(&manifest)?;
            let store = RunStore::new(commands::run_store_root(
                cli.store.as_deref(),
                &loaded,
                &manifest,
            ));
            let summary = commands::run(&store, &manifest, force_classify)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Classify { run, force } => {
            let summary = commands::classify(&store, &run, force)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::IngestReal { csv, run } => {
            let n = commands::ingest_real(&store, &csv, &run)?;
            println!("ingested {n} real results into run `{run}`");
        }
        Command::Report { run, json } => {
            let report = commands::report(&store, &run)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_csv());
            }
        }
        Command::ServeMock {
            role,
            port,
            params,
            kind,
            host,
        } => {
            let endpoint = commands::mock_endpoint(role, params.as_deref(), kind.as_deref())?;
            commands::serve_mock(role, endpoint, SocketAddr::new(host, port))?;
        }
        Command::ServeApi { run, port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(commands::serve_api(store, run, SocketAddr::new(host, port)))?;
        }
        Command::Fidelity { generated, truth } => {
            print!("{}", commands::fidelity(&generated, &truth)?.to_csv());
        }
    }
    Ok(())
}
