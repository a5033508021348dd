//! Independent reference implementations and generators shared by the
//! integration suites.
#![allow(dead_code)]

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use proptest::prelude::*;
use serde_json::{Map, Value};
use wmeval_core::protocol::{Envelope, MessageType};
use wmeval_core::{Action, ActionChunk, ArmDelta, Frame, Quat};

// ---------------------------------------------------------------- protocol

fn json_leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        any::<u64>().prop_map(Value::from),
        (-1e12f64..1e12).prop_map(Value::from),
        "[ -~]{0,12}".prop_map(Value::from),
        "\\PC{0,6}".prop_map(Value::from),
    ]
}

pub fn json_value() -> impl Strategy<Value = Value> {
    json_leaf().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

pub fn frame_strategy(max_side: u32) -> impl Strategy<Value = Frame> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |data| Frame::new(w, h, data).unwrap())
    })
}

pub fn envelope_strategy() -> impl Strategy<Value = Envelope> {
    (
        prop::sample::select(MessageType::ALL.to_vec()),
        "[A-Za-z0-9_-]{0,16}",
        prop::collection::btree_map("[a-z][a-z_]{0,8}", json_value(), 0..5),
        prop::collection::vec(frame_strategy(6), 0..3),
    )
        .prop_map(|(ty, session, fields, frames)| {
            let mut env = Envelope::new(ty, session).with_frames(&frames);
            env.fields = fields
                .into_iter()
                .filter(|(k, _)| !matches!(k.as_str(), "type" | "session_id" | "payload_frames"))
                .collect::<Map<_, _>>();
            env
        })
}

// ---------------------------------------------------------------- actions

pub fn unit_quat() -> impl Strategy<Value = Quat> {
    (
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        -std::f64::consts::PI..std::f64::consts::PI,
    )
        .prop_filter("axis needs length", |(x, y, z, _)| {
            x * x + y * y + z * z > 1e-6
        })
        .prop_map(|(x, y, z, angle)| Quat::from_axis_angle([x, y, z], angle))
}

pub fn arm_delta() -> impl Strategy<Value = ArmDelta> {
    (
        prop::array::uniform3(-0.05f64..0.05),
        unit_quat(),
        0.0f64..=1.0,
    )
        .prop_map(|(translation, rotation, jaw)| ArmDelta {
            translation,
            rotation,
            jaw,
        })
}

pub fn action_chunk(
    rate_hz: u32,
    arms: usize,
    max_len: usize,
) -> impl Strategy<Value = ActionChunk> {
    prop::collection::vec(prop::collection::vec(arm_delta(), arms), 1..=max_len).prop_map(
        move |actions| ActionChunk {
            actions: actions.into_iter().map(|arms| Action { arms }).collect(),
            rate_hz,
        },
    )
}

/// Net pose of one arm over a chunk by sequential integration.
pub fn net_pose(chunk: &ActionChunk, arm: usize) -> (Vector3<f64>, UnitQuaternion<f64>) {
    let mut t = Vector3::zeros();
    let mut q = UnitQuaternion::identity();
    for action in &chunk.actions {
        let a = &action.arms[arm];
        t += Vector3::from(a.translation);
        let r = a.rotation;
        q *= UnitQuaternion::from_quaternion(Quaternion::new(r.w, r.x, r.y, r.z));
    }
    (t, q)
}

/// Sign-invariant distance between unit quaternions.
pub fn quat_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (a, b) = (a.as_ref().coords, b.as_ref().coords);
    (a - b).norm().min((a + b).norm())
}

// ---------------------------------------------------------------- fusion

/// Spans by stride arithmetic: `ceil((L - C) / S) + 1` windows, the last one
/// end-anchored.
pub fn stride_spans(len: usize, chunk: usize, overlap: usize) -> Vec<(usize, usize)> {
    if len == 0 {
        return vec![];
    }
    if len <= chunk {
        return vec![(0, len)];
    }
    let stride = chunk - overlap;
    let count = (len - chunk).div_ceil(stride) + 1;
    (0..count)
        .map(|i| {
            let start = (i * stride).min(len - chunk);
            (start, start + chunk)
        })
        .collect()
}

// ---------------------------------------------------------------- statistics

/// MMRV by enumerating every ordered pair.
pub fn mmrv_brute(sim: &[f64], real: &[f64]) -> f64 {
    let n = sim.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let sim_says = sim[i] < sim[j];
            let real_says = real[i] < real[j];
            if sim_says != real_says {
                worst = worst.max((real[i] - real[j]).abs());
            }
        }
        total += worst;
    }
    total / n as f64
}

/// ICC(2,1) from a two-way ANOVA table with the error term by subtraction.
pub fn icc_anova(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let k = rows[0].len();
    let all: Vec<f64> = rows.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / (n * k) as f64;
    let sst: f64 = all.iter().map(|v| (v - grand).powi(2)).sum();
    let ssr: f64 = rows
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / k as f64;
            k as f64 * (m - grand).powi(2)
        })
        .sum();
    let ssc: f64 = (0..k)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            n as f64 * (m - grand).powi(2)
        })
        .sum();
    let sse = sst - ssr - ssc;
    let msr = ssr / (n - 1) as f64;
    let msc = ssc / (k - 1) as f64;
    let mse = sse / ((n - 1) * (k - 1)) as f64;
    (msr - mse) / (msr + (k as f64 - 1.0) * mse + k as f64 * (msc - mse) / n as f64)
}

// ---------------------------------------------------------------- fidelity

fn luma(f: &Frame) -> Vec<f64> {
    f.data()
        .chunks(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// SSIM straight from the definition: a normalized 2-D Gaussian window
/// evaluated at every fully contained position, no separable filtering.
pub fn ssim_direct(a: &Frame, b: &Frame) -> f64 {
    const WIN: usize = 11;
    const SIGMA: f64 = 1.5;
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (w, h) = (a.width() as usize, a.height() as usize);
    let (la, lb) = (luma(a), luma(b));
    let r = (WIN / 2) as f64;
    let mut kernel = [[0.0f64; WIN]; WIN];
    let mut sum = 0.0;
    for (y, row) in kernel.iter_mut().enumerate() {
        for (x, k) in row.iter_mut().enumerate() {
            let d2 = (x as f64 - r).powi(2) + (y as f64 - r).powi(2);
            *k = (-d2 / (2.0 * SIGMA * SIGMA)).exp();
            sum += *k;
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for oy in 0..=h - WIN {
        for ox in 0..=w - WIN {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (y, row) in kernel.iter().enumerate() {
                for (x, k) in row.iter().enumerate() {
                    let g = k / sum;
                    let i = (oy + y) * w + ox + x;
                    ma += g * la[i];
                    mb += g * lb[i];
                    saa += g * la[i] * la[i];
                    sbb += g * lb[i] * lb[i];
                    sab += g * la[i] * lb[i];
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Mean absolute difference over all channel bytes.
pub fn l1_direct(a: &Frame, b: &Frame) -> f64 {
    let s: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as i64 - *y as i64).unsigned_abs())
        .sum();
    s as f64 / a.data().len() as f64
}
