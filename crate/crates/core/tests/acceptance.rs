//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use serde_json::json;
use wmeval_core::fidelity::{l1_frame, ssim_frame};
use wmeval_core::fusion::{
    classify_video, fuse_labels, plan_chunks, ChunkClass, ChunkLabel, Outcome, OutcomeCause,
    CHUNK_LEN, CHUNK_OVERLAP,
};
use wmeval_core::mock::sandbox::{initial_layout, sandbox_render, SandboxParams};
use wmeval_core::mock::{
    is_near_miss, OracleClassifier, ProportionalPolicy, ProportionalSettings, SandboxWorldModel,
};
use wmeval_core::protocol::{
    decode_envelope, encode_envelope, Envelope, ProtocolLimits, StreamDecoder,
};
use wmeval_core::registry::BackendRegistry;
use wmeval_core::rollout::{
    catalog, resample_chunk, run_rollout, Domain, RolloutConfig, TrialSpec, TARGET_RATE_HZ,
};
use wmeval_core::stats::{
    bland_altman, icc_2_1, mbe, mmrv, pearson, seed_averaged_sr, RatingMatrix, Summary,
};
use wmeval_core::store::{execute_run, RunOptions, RunStore};

type Outcome_ = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(name: &str, elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("{name} took {elapsed:.1?}, budget {budget:?}")
    })
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config::default(),
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    )
}

// ------------------------------------------------------------------ protocol

fn golden_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "tests", "golden"]
        .iter()
        .collect()
}

fn protocol() -> Outcome_ {
    let start = Instant::now();
    let mut rng = runner();
    let strategy = common::envelope_strategy();
    for i in 0..1000 {
        let env: Envelope = sample(&mut rng, &strategy);
        let bytes = encode_envelope(&env).map_err(|e| e.to_string())?;
        let (back, used) = decode_envelope(&bytes).map_err(|e| e.to_string())?;
        ensure(back == env && used == bytes.len(), || {
            format!("round-trip {i} lossy")
        })?;

        let cuts: Vec<prop::sample::Index> = sample(
            &mut rng,
            &prop::collection::vec(any::<prop::sample::Index>(), 0..6),
        );
        let mut points: Vec<usize> = cuts.iter().map(|c| c.index(bytes.len() + 1)).collect();
        points.extend([0, bytes.len()]);
        points.sort_unstable();
        let mut decoder = StreamDecoder::new(ProtocolLimits::default());
        let mut out = Vec::new();
        for w in points.windows(2) {
            decoder.push(&bytes[w[0]..w[1]]);
            while let Some(e) = decoder.next_envelope().map_err(|e| e.to_string())? {
                out.push(e);
            }
        }
        ensure(out == vec![env], || format!("split decode {i} differs"))?;
    }
    let mut golden = 0;
    for entry in std::fs::read_dir(golden_dir()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "bin") {
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            let (env, _) =
                decode_envelope(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
            ensure(
                encode_envelope(&env).map_err(|e| e.to_string())? == bytes,
                || format!("{} does not re-encode identically", path.display()),
            )?;
            golden += 1;
        }
    }
    ensure(golden >= 6, || format!("only {golden} golden vectors"))?;
    within_budget("protocol", start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "1000 round-trips + splits, {golden} golden vectors, {:.2?}",
        start.elapsed()
    ))
}

// ------------------------------------------------------------------ campaign

fn campaign_manifest(run_id: &str) -> serde_json::Value {
    let tasks: Vec<_> = catalog()
        .into_iter()
        .filter(|t| t.domain == Domain::Tabletop)
        .collect();
    json!({
        "run_id": run_id,
        "created_at": "2026-01-01T00:00:00Z",
        "tasks": tasks,
        "policies": [{"id": "prop", "endpoint": "mock:proportional?rate=30&near_miss=0.3"}],
        "world_model": {"endpoint": "mock:sandbox?false_attach_prob=0.3"},
        "classifier": {"endpoint": "mock:oracle"},
        "trials_per_task": 10,
        "seeds": [0, 1, 2],
        "parallelism": 4
    })
}

fn files(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(&path, out);
            } else {
                out.push(path);
            }
        }
    }
    let mut out = Vec::new();
    walk(root, &mut out);
    out.sort();
    out
}

fn same_bytes(a: &Path, b: &Path) -> std::io::Result<bool> {
    let (mut fa, mut fb) = (std::fs::File::open(a)?, std::fs::File::open(b)?);
    if fa.metadata()?.len() != fb.metadata()?.len() {
        return Ok(false);
    }
    let (mut ba, mut bb) = (vec![0u8; 1 << 16], vec![0u8; 1 << 16]);
    loop {
        let n = fa.read(&mut ba)?;
        if n == 0 {
            return Ok(true);
        }
        fb.read_exact(&mut bb[..n])?;
        if ba[..n] != bb[..n] {
            return Ok(false);
        }
    }
}

fn campaign() -> Outcome_ {
    let registry = BackendRegistry::with_defaults(ProtocolLimits::default());
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest_path = tmp.path().join("manifest.json");
    std::fs::write(&manifest_path, campaign_manifest("accept").to_string())
        .map_err(|e| e.to_string())?;
    let manifest =
        wmeval_core::rollout::RunManifest::load(&manifest_path).map_err(|e| e.to_string())?;

    let mut roots = Vec::new();
    let mut times = Vec::new();
    for name in ["a", "b"] {
        let root = tmp.path().join(name);
        let store = RunStore::new(&root);
        let start = Instant::now();
        let summary = execute_run(
            &store,
            &manifest,
            &registry,
            tmp.path(),
            &RunOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        within_budget("campaign", start.elapsed(), Duration::from_secs(60))?;
        ensure(
            summary.rollouts == 4 * 10 * 3 && summary.failed == 0,
            || format!("{summary:?}"),
        )?;
        ensure(summary.classified == 120 && summary.unlabeled == 0, || {
            format!("{summary:?}")
        })?;
        for key in store.rollout_keys("accept").map_err(|e| e.to_string())? {
            let meta = store
                .rollout_meta("accept", &key)
                .map_err(|e| e.to_string())?;
            let limit = manifest
                .task(&key.task)
                .expect("task in manifest")
                .step_limit as usize;
            let want = (meta.action_log.len() * 12).min(limit);
            ensure(
                meta.steps_executed == want && meta.frame_count == want,
                || {
                    format!(
                        "{}: steps {} frames {} want {want}",
                        key.id(),
                        meta.steps_executed,
                        meta.frame_count
                    )
                },
            )?;
        }
        roots.push(root);
    }
    let (fa, fb) = (files(&roots[0]), files(&roots[1]));
    let rel = |root: &Path, v: &[PathBuf]| -> Vec<PathBuf> {
        v.iter()
            .map(|p| p.strip_prefix(root).expect("under root").to_owned())
            .collect()
    };
    ensure(rel(&roots[0], &fa) == rel(&roots[1], &fb), || {
        "file sets differ".into()
    })?;
    let mut bytes = 0u64;
    for (a, b) in fa.iter().zip(&fb) {
        ensure(same_bytes(a, b).map_err(|e| e.to_string())?, || {
            format!("{} differs", a.display())
        })?;
        bytes += a.metadata().map_err(|e| e.to_string())?.len();
    }
    Ok(format!(
        "120 rollouts, steps law holds, {} files / {:.0} MiB identical, runs {:.1?} + {:.1?}",
        fa.len(),
        bytes as f64 / (1 << 20) as f64,
        times[0],
        times[1]
    ))
}

// ------------------------------------------------------------------ resampler

fn resampler() -> Outcome_ {
    let mut rng = runner();
    let mut worst = (0.0f64, 0.0f64);
    for rate in [30u32, 15] {
        let strategy = common::action_chunk(rate, 2, 60);
        for i in 0..500 {
            let chunk = sample(&mut rng, &strategy);
            let out = resample_chunk(&chunk, TARGET_RATE_HZ).map_err(|e| e.to_string())?;
            for arm in 0..2 {
                let (t0, q0) = common::net_pose(&chunk, arm);
                let (t1, q1) = common::net_pose(&out, arm);
                let dt = (t0 - t1).norm();
                let dq = common::quat_distance(&q0, &q1);
                worst = (worst.0.max(dt), worst.1.max(dq));
                ensure(dt <= 1e-9 && dq <= 1e-9, || {
                    format!("{rate} Hz chunk {i}: dt {dt:e} dq {dq:e}")
                })?;
            }
        }
    }
    Ok(format!(
        "1000 chunks, max translation err {:.1e}, max quaternion dist {:.1e}",
        worst.0, worst.1
    ))
}

// ------------------------------------------------------------------ fusion

fn labelled(seq: &[ChunkClass]) -> Vec<ChunkLabel> {
    seq.iter()
        .enumerate()
        .map(|(span_index, &label)| ChunkLabel { span_index, label })
        .collect()
}

fn fusion() -> Outcome_ {
    for len in 1..=500 {
        let got = plan_chunks(len, CHUNK_LEN, CHUNK_OVERLAP).spans;
        ensure(
            got == common::stride_spans(len, CHUNK_LEN, CHUNK_OVERLAP),
            || format!("plan for {len} differs"),
        )?;
    }
    use ChunkClass::*;
    let rules = [
        (
            vec![Default, Success, Default, Anomaly],
            Outcome::Success,
            OutcomeCause::SuccessFirst,
        ),
        (
            vec![Default, Anomaly, Success],
            Outcome::Failure,
            OutcomeCause::AnomalyFirst,
        ),
        (vec![Default; 5], Outcome::Failure, OutcomeCause::NoSuccess),
    ];
    for (seq, outcome, cause) in &rules {
        let o = fuse_labels(&labelled(seq)).map_err(|e| e.to_string())?;
        ensure((o.outcome, o.cause) == (*outcome, *cause), || {
            format!("{seq:?} fused to {:?}", o.cause)
        })?;
    }
    Ok("plans for lengths 1..500 match stride oracle; 3 fusion rules hold".into())
}

// ------------------------------------------------------------------ statistics

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn statistics() -> Outcome_ {
    let mut rng = runner();
    let instance = (2usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
        )
    });
    for i in 0..200 {
        let (sim, real) = sample(&mut rng, &instance);
        let got = mmrv(&sim, &real).map_err(|e| e.to_string())?;
        ensure(close(got, common::mmrv_brute(&sim, &real), 1e-12), || {
            format!("mmrv instance {i}")
        })?;
        let consistent: Vec<f64> = real.iter().map(|r| r * r + 0.2).collect();
        ensure(
            mmrv(&consistent, &real).map_err(|e| e.to_string())? == 0.0,
            || format!("mmrv consistent {i}"),
        )?;
    }
    let matrix = (3usize..12, 2usize..6)
        .prop_flat_map(|(n, k)| prop::collection::vec(prop::collection::vec(0.0f64..1.0, k), n));
    let mut worst_icc = 0.0f64;
    for i in 0..200 {
        let rows = sample(&mut rng, &matrix);
        let got = icc_2_1(&RatingMatrix::new(&rows).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let err = (got - common::icc_anova(&rows)).abs();
        worst_icc = worst_icc.max(err);
        ensure(err <= 1e-9, || format!("icc matrix {i} off by {err:e}"))?;
    }

    // r = 3/sqrt(10); with 2 degrees of freedom the two-sided p is 1 - r.
    let c = pearson(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 2.0]).map_err(|e| e.to_string())?;
    let r = 3.0 / 10f64.sqrt();
    ensure(
        close(c.r, r, 1e-9) && close(c.p_value, 1.0 - r, 1e-9),
        || format!("pearson {c:?}"),
    )?;
    // r = 1/2 with 1 degree of freedom: t = 1/sqrt(3), p = 1 - (2/pi)·atan(t) = 2/3.
    let c = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).map_err(|e| e.to_string())?;
    ensure(
        close(c.r, 0.5, 1e-9) && close(c.p_value, 2.0 / 3.0, 1e-9),
        || format!("pearson {c:?}"),
    )?;

    ensure(
        close(
            mmrv(&[0.9, 0.1], &[0.2, 0.8]).unwrap_or(f64::NAN),
            0.6,
            1e-12,
        ),
        || "mmrv example".into(),
    )?;
    ensure(
        close(
            mmrv(&[0.5, 0.5], &[0.3, 0.7]).unwrap_or(f64::NAN),
            0.2,
            1e-12,
        ),
        || "mmrv tie example".into(),
    )?;
    let m = mbe(&[1.0, 0.8], &[0.6, 0.6]).map_err(|e| e.to_string())?;
    ensure(close(m.mbe, 0.3, 1e-12), || format!("mbe {m:?}"))?;
    let ba = bland_altman(&[0.5, 0.6], &[0.4, 0.3]).map_err(|e| e.to_string())?;
    let sd = 0.02f64.sqrt();
    ensure(
        close(ba.mean_diff, 0.2, 1e-12)
            && close(ba.sd_diff, sd, 1e-12)
            && close(ba.loa_low, 0.2 - 1.96 * sd, 1e-12)
            && close(ba.loa_high, 0.2 + 1.96 * sd, 1e-12),
        || format!("bland-altman {ba:?}"),
    )?;
    let rows = vec![
        vec![1.0, 2.0],
        vec![3.0, 4.0],
        vec![5.0, 6.0],
        vec![7.0, 8.0],
    ];
    let icc = icc_2_1(&RatingMatrix::new(&rows).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(close(icc, 40.0 / 43.0, 1e-12), || {
        format!("icc example {icc}")
    })?;
    Ok(format!(
        "mmrv 200/200, icc 200/200 (max err {worst_icc:.1e}), pearson/mbe/BA hand cases exact"
    ))
}

// ------------------------------------------------------------------ bias injection

const FALSE_ATTACH: f64 = 0.3;
const NEAR_MISS_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const BIAS_TRIALS: u32 = 25;
const BIAS_SEEDS: [u64; 3] = [0, 1, 2];

fn sandbox_success(
    spec: &TrialSpec,
    seed: u64,
    settings: ProportionalSettings,
    false_attach_prob: f64,
) -> Result<bool, String> {
    let mut policy = ProportionalPolicy::new(settings);
    let mut world = SandboxWorldModel::new(SandboxParams {
        false_attach_prob,
        ..SandboxParams::default()
    })
    .map_err(|e| e.to_string())?;
    let record = run_rollout(
        spec,
        seed,
        &mut policy,
        &mut world,
        &RolloutConfig::default(),
    );
    if let Some(e) = record.error {
        return Err(format!("{}: {e}", record.key.id()));
    }
    let mut classifier = OracleClassifier::default();
    let (outcome, _) = classify_video(record.video.frames(), &mut classifier, &spec.task.name)
        .map_err(|e| e.to_string())?;
    Ok(outcome.is_success())
}

fn bias_injection() -> Outcome_ {
    let start = Instant::now();
    let tasks: Vec<_> = catalog()
        .into_iter()
        .filter(|t| t.domain == Domain::Tabletop)
        .collect();
    let (mut sim_sr, mut real_sr, mut expected) = (Vec::new(), Vec::new(), Vec::new());
    let (mut near_trials, mut script_mismatch) = (0usize, 0usize);
    for (p, &q) in NEAR_MISS_FRACTIONS.iter().enumerate() {
        let settings = ProportionalSettings {
            near_miss_fraction: q,
            ..ProportionalSettings::at_rate(30)
        };
        for (t, task) in tasks.iter().enumerate() {
            let (mut sim_trials, mut real_trials) = (Vec::new(), Vec::new());
            let mut near_here = 0usize;
            for trial in 0..BIAS_TRIALS {
                let layout = initial_layout(1_000 * t as u64 + trial as u64);
                let spec = TrialSpec {
                    task: task.clone(),
                    trial_index: trial,
                    initial_frame: Arc::new(sandbox_render(&layout, 64, 64)),
                    seeds: BIAS_SEEDS.to_vec(),
                    policy_id: format!("near_miss_{p}"),
                };
                let near = is_near_miss(&spec.initial_frame, q);
                near_here += near as usize;
                let real = sandbox_success(&spec, 0, settings, 0.0)?;
                // Without spurious grasps the script succeeds exactly on its non-near-miss episodes.
                script_mismatch += (real == near) as usize;
                real_trials.push(vec![real]);
                let seeds = BIAS_SEEDS
                    .iter()
                    .map(|&s| sandbox_success(&spec, s, settings, FALSE_ATTACH))
                    .collect::<Result<Vec<_>, _>>()?;
                sim_trials.push(seeds);
            }
            near_trials += near_here;
            sim_sr.push(seed_averaged_sr(&sim_trials).map_err(|e| e.to_string())?);
            real_sr.push(seed_averaged_sr(&real_trials).map_err(|e| e.to_string())?);
            // Closed form: a near-miss episode succeeds only through one spurious
            // grasp at the single jaw closing, probability FALSE_ATTACH.
            expected.push(FALSE_ATTACH * near_here as f64 / BIAS_TRIALS as f64);
        }
    }
    let measured = mbe(&sim_sr, &real_sr).map_err(|e| e.to_string())?;
    let ba = bland_altman(&sim_sr, &real_sr).map_err(|e| e.to_string())?;
    let analytic = expected.iter().sum::<f64>() / expected.len() as f64;
    let nominal =
        FALSE_ATTACH * NEAR_MISS_FRACTIONS.iter().sum::<f64>() / NEAR_MISS_FRACTIONS.len() as f64;
    ensure(near_trials >= 200, || {
        format!("only {near_trials} near-miss trials")
    })?;
    ensure(script_mismatch == 0, || {
        format!("{script_mismatch} real rollouts disagree with the script")
    })?;
    ensure((measured.mbe - analytic).abs() <= 0.05, || {
        format!("MBE {:.4} vs analytic {analytic:.4}", measured.mbe)
    })?;
    ensure(ba.mean_diff > 0.0, || {
        format!("Bland-Altman mean {:.4}", ba.mean_diff)
    })?;
    within_budget("bias injection", start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "{near_trials} near-miss trials, MBE {:.4} [{:.4}, {:.4}] vs analytic {analytic:.4} (nominal {nominal:.4}), BA mean {:.4}, {:.1?}",
        measured.mbe,
        measured.ci95_low,
        measured.ci95_high,
        ba.mean_diff,
        start.elapsed()
    ))
}

// ------------------------------------------------------------------ fidelity

fn fidelity() -> Outcome_ {
    let mut rng = runner();
    let pair = (11u32..=24, 11u32..=24).prop_flat_map(|(w, h)| {
        let n = (w * h * 3) as usize;
        (
            Just((w, h)),
            prop::collection::vec(any::<u8>(), n),
            prop::collection::vec(any::<u8>(), n),
        )
    });
    let mut worst = 0.0f64;
    for i in 0..100 {
        let ((w, h), a, b) = sample(&mut rng, &pair);
        let a = wmeval_core::Frame::new(w, h, a).map_err(|e| e.to_string())?;
        let b = wmeval_core::Frame::new(w, h, b).map_err(|e| e.to_string())?;
        ensure(
            ssim_frame(&a, &a).map_err(|e| e.to_string())? == 1.0,
            || format!("ssim(a,a) != 1 for pair {i}"),
        )?;
        ensure(l1_frame(&a, &a).map_err(|e| e.to_string())? == 0.0, || {
            format!("l1(a,a) != 0 for pair {i}")
        })?;
        let err =
            (ssim_frame(&a, &b).map_err(|e| e.to_string())? - common::ssim_direct(&a, &b)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("pair {i}: ssim off by {err:e}"))?;
    }
    Ok(format!(
        "identities exact; 100 random pairs within {worst:.1e} of direct SSIM"
    ))
}

// ------------------------------------------------------------------ conditional

/// Per-task (Pearson, MMRV) for the handover, throw, knot-tie and pickup tasks.
const PER_TASK: [(&str, [(f64, f64); 4], (f64, f64), (f64, f64), (f64, f64)); 3] = [
    // (method, per task, reference averages, Pearson mean/sd, MMRV mean/sd)
    (
        "manual",
        [
            (0.468, 0.217),
            (0.716, 0.183),
            (0.840, 0.050),
            (0.806, 0.067),
        ],
        (0.707, 0.129),
        (0.71, 0.17),
        (0.13, 0.08),
    ),
    (
        "without_failures",
        [
            (0.313, 0.183),
            (0.533, 0.317),
            (0.922, 0.017),
            (0.701, 0.067),
        ],
        (0.617, 0.146),
        (0.62, 0.26),
        (0.15, 0.13),
    ),
    (
        "automated",
        [
            (0.656, 0.133),
            (0.639, 0.117),
            (0.729, 0.033),
            (0.639, 0.100),
        ],
        (0.666, 0.096),
        (0.67, 0.04),
        (0.10, 0.04),
    ),
];

fn round_to(x: f64, places: i32) -> f64 {
    let k = 10f64.powi(places);
    (x * k).round() / k
}

/// `x` agrees with a figure reported to `places` decimals: within half a
/// unit of its last digit.
fn agrees(x: f64, reported: f64, places: i32) -> bool {
    (x - reported).abs() <= 0.5 * 10f64.powi(-places) + 1e-12
}

fn table_averages() -> Outcome_ {
    let mut boundary = Vec::new();
    for (method, per_task, avg, pearson_2, mmrv_2) in PER_TASK {
        let rs: Vec<f64> = per_task.iter().map(|p| p.0).collect();
        let ms: Vec<f64> = per_task.iter().map(|p| p.1).collect();
        let (r, m) = (
            Summary::of(&rs).ok_or("empty")?,
            Summary::of(&ms).ok_or("empty")?,
        );
        ensure(agrees(r.mean, avg.0, 3) && agrees(m.mean, avg.1, 3), || {
            format!(
                "{method}: averages {:.5}/{:.5} vs {}/{}",
                r.mean, m.mean, avg.0, avg.1
            )
        })?;
        ensure(
            agrees(r.mean, pearson_2.0, 2)
                && agrees(r.sd, pearson_2.1, 2)
                && agrees(m.mean, mmrv_2.0, 2)
                && agrees(m.sd, mmrv_2.1, 2),
            || format!("{method}: {r:?} {m:?}"),
        )?;
        for (x, p) in [(r.mean, avg.0), (m.mean, avg.1)] {
            if round_to(x, 3) != p {
                boundary.push(format!("{method} {x:.4}~{p}"));
            }
        }
    }
    let mut detail =
        "per-task Pearson/MMRV average to the reference means and sds for all 3 methods".to_owned();
    if !boundary.is_empty() {
        detail.push_str(&format!(
            " (on the rounding boundary: {})",
            boundary.join(", ")
        ));
    }
    Ok(detail)
}

/// Reference MBE with its 95% interval per method.
const REFERENCE_MBE: [(&str, f64, f64, f64); 3] = [
    ("manual", 0.140, 0.081, 0.199),
    ("without_failures", 0.325, 0.262, 0.388),
    ("automated", 0.153, 0.093, 0.213),
];

/// Reproduces the reference MBE from a per-pair table when one is supplied
/// (`WMEVAL_REFERENCE_PAIRS`: CSV `method,policy_id,task,sim_sr,real_sr`).
fn table_mbe() -> Result<Option<String>, String> {
    let Some(path) = std::env::var_os("WMEVAL_REFERENCE_PAIRS") else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let mut pairs: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        ensure(f.len() == 5, || {
            format!("line {}: expected 5 fields", i + 1)
        })?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        let e = pairs.entry(f[0].to_owned()).or_default();
        e.0.push(parse(f[3])?);
        e.1.push(parse(f[4])?);
    }
    let mut checked = Vec::new();
    for (method, want, lo, hi) in REFERENCE_MBE {
        let Some((sim, real)) = pairs.get(method) else {
            continue;
        };
        let m = mbe(sim, real).map_err(|e| e.to_string())?;
        ensure(
            agrees(m.mbe, want, 3) && agrees(m.ci95_low, lo, 3) && agrees(m.ci95_high, hi, 3),
            || {
                format!(
                    "{method}: MBE {:.4} [{:.4}, {:.4}]",
                    m.mbe, m.ci95_low, m.ci95_high
                )
            },
        )?;
        checked.push(method);
    }
    ensure(!checked.is_empty(), || {
        "no known method in the pair table".into()
    })?;
    Ok(Some(format!("MBE reproduced for {}", checked.join(", "))))
}

// ------------------------------------------------------------------ driver

fn main() {
    // Optional name filters, e.g. `cargo test --test acceptance -- statistics`.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected =
        |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut failed = 0;
    let mut report = |name: &str, result: Outcome_| match result {
        Ok(detail) => println!("PASS  {name:<24} {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL  {name:<24} {why}");
        }
    };
    let criteria: [(&str, fn() -> Outcome_); 8] = [
        ("protocol", protocol),
        ("rollout-campaign", campaign),
        ("resampler", resampler),
        ("chunk-fusion", fusion),
        ("statistics", statistics),
        ("bias-injection", bias_injection),
        ("fidelity", fidelity),
        ("conditional-averages", table_averages),
    ];
    for (name, check) in criteria {
        if !selected(name) {
            continue;
        }
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        report(name, result);
    }
    if selected("conditional-mbe") {
        match table_mbe() {
            Ok(Some(detail)) => report("conditional-mbe", Ok(detail)),
            Ok(None) => println!(
                "SKIP  {:<24} per-pair sim/real table not supplied (set WMEVAL_REFERENCE_PAIRS); no per-pair data is available",
                "conditional-mbe"
            ),
            Err(why) => report("conditional-mbe", Err(why)),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
