use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use wmeval_core::fidelity::{fidelity_curve, FidelityCurve};
use wmeval_core::mock::ParamMap;
use wmeval_core::protocol::{serve_listener, ProtocolLimits, Role};
use wmeval_core::registry::{BackendRegistry, Endpoint};
use wmeval_core::rollout::{ingest_real_results, RunManifest};
use wmeval_core::stats::CampaignReport;
use wmeval_core::store::{
    classify_run, execute_run, report_run, vframes, ClassifySummary, RunOptions, RunStore,
    RunSummary,
};

pub fn registry() -> BackendRegistry {
    BackendRegistry::with_defaults(ProtocolLimits::default())
}

/// Store root for `run`: the explicit `--store`, else the manifest's
/// `output_dir` (relative to the manifest), else `./store`.
pub fn run_store_root(
    explicit: Option<&Path>,
    manifest: &RunManifest,
    manifest_path: &Path,
) -> PathBuf {
    match explicit {
        Some(p) => p.to_owned(),
        None if !manifest.output_dir.as_os_str().is_empty() => {
            manifest_dir(manifest_path).join(&manifest.output_dir)
        }
        None => PathBuf::from(DEFAULT_STORE),
    }
}

pub const DEFAULT_STORE: &str = "store";

fn manifest_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    RunManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

pub fn run(store: &RunStore, manifest_path: &Path, force_classify: bool) -> Result<RunSummary> {
    let manifest = load_manifest(manifest_path)?;
    let registry = BackendRegistry::with_defaults(ProtocolLimits {
        request_timeout: Duration::from_secs(manifest.timeout_secs),
        ..ProtocolLimits::default()
    });
    let options = RunOptions { force_classify };
    Ok(execute_run(
        store,
        &manifest,
        &registry,
        manifest_dir(manifest_path),
        &options,
    )?)
}

pub fn classify(store: &RunStore, run_id: &str, force: bool) -> Result<ClassifySummary> {
    Ok(classify_run(store, run_id, &registry(), force)?)
}

/// Validates a real-results CSV and attaches it to an existing run.
pub fn ingest_real(store: &RunStore, csv: &Path, run_id: &str) -> Result<usize> {
    store.manifest(run_id)?;
    let rows = ingest_real_results(csv)?;
    store.save_real_results(run_id, &rows)?;
    Ok(rows.len())
}

pub fn report(store: &RunStore, run_id: &str) -> Result<CampaignReport> {
    Ok(report_run(store, run_id)?)
}

pub fn fidelity(generated: &Path, truth: &Path) -> Result<FidelityCurve> {
    let g = vframes::read_file(generated)?;
    let t = vframes::read_file(truth)?;
    Ok(fidelity_curve(&g, &t)?)
}

fn default_kind(role: Role) -> &'static str {
    match role {
        Role::Policy => "proportional",
        Role::WorldModel => "sandbox",
        Role::Classifier => "oracle",
    }
}

/// Reads a `--params` file: a flat JSON object, optionally with a `kind`
/// entry naming the mock.
pub fn mock_endpoint(role: Role, params: Option<&Path>, kind: Option<&str>) -> Result<Endpoint> {
    let mut map = match params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            ParamMap::from_json(&value).map_err(anyhow::Error::msg)?
        }
        None => ParamMap::default(),
    };
    let from_file = map.0.remove("kind");
    let kind = kind
        .map(str::to_owned)
        .or(from_file)
        .unwrap_or_else(|| default_kind(role).to_owned());
    if kind.is_empty() {
        bail!("mock kind must not be empty");
    }
    Ok(Endpoint::Mock { kind, params: map })
}

pub fn serve_mock(role: Role, endpoint: Endpoint, addr: SocketAddr) -> Result<()> {
    let registry = registry();
    let backend = registry.served_endpoint(role, endpoint)?;
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    eprintln!("serving mock {role} on {}", listener.local_addr()?);
    serve_listener(listener, backend, registry.limits())?;
    Ok(())
}

pub async fn serve_api(store: RunStore, run_id: String, addr: SocketAddr) -> Result<()> {
    store.manifest(&run_id)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    eprintln!(
        "serving run `{run_id}` on http://{}",
        listener.local_addr()?
    );
    axum::serve(listener, crate::api::router(store, run_id)).await?;
    Ok(())
}
