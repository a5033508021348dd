//! Per-frame L1 and SSIM between generated and ground-truth video.
//!
//! SSIM is computed on BT.601 luma with an 11×11 Gaussian window (σ = 1.5),
//! `C1 = (0.01·255)²`, `C2 = (0.03·255)²`, averaged over window positions
//! that lie fully inside the frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, VideoClip};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FidelityError {
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("frame {0}x{1} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")]
    TooSmall(u32, u32),
    #[error("videos share no frame indices")]
    EmptyOverlap,
}

fn same_size(a: &Frame, b: &Frame) -> Result<(), FidelityError> {
    if a.dims() != b.dims() {
        return Err(FidelityError::SizeMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

/// Mean absolute difference over all pixels and channels, in [0, 255].
pub fn l1_frame(a: &Frame, b: &Frame) -> Result<f64, FidelityError> {
    same_size(a, b)?;
    let total: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x.abs_diff(y) as u64)
        .sum();
    Ok(total as f64 / a.data().len() as f64)
}

/// BT.601 luma of every pixel, row-major.
pub fn luma(frame: &Frame) -> Vec<f64> {
    frame
        .data()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-mode separable filtering of a `w×h` image.
fn filter_valid(img: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .zip(&line[x..x + SSIM_WINDOW])
                .map(|(t, v)| t * v)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

pub fn ssim_frame(a: &Frame, b: &Frame) -> Result<f64, FidelityError> {
    same_size(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(FidelityError::TooSmall(a.width(), a.height()));
    }
    let taps = gaussian_taps();
    let (la, lb) = (luma(a), luma(b));
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(&la, w, h, &taps);
    let mu_b = filter_valid(&lb, w, h, &taps);
    let e_aa = filter_valid(&prod(&la, &la), w, h, &taps);
    let e_bb = filter_valid(&prod(&lb, &lb), w, h, &taps);
    let e_ab = filter_valid(&prod(&la, &lb), w, h, &taps);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        total += ssim_index(mu_a[i], mu_b[i], e_aa[i], e_bb[i], e_ab[i]);
    }
    Ok(total / mu_a.len() as f64)
}

/// SSIM from local first and second moments.
pub fn ssim_index(mu_a: f64, mu_b: f64, e_aa: f64, e_bb: f64, e_ab: f64) -> f64 {
    let var_a = e_aa - mu_a * mu_a;
    let var_b = e_bb - mu_b * mu_b;
    let cov = e_ab - mu_a * mu_b;
    let num = (2.0 * (mu_a * mu_b) + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub index: usize,
    pub l1: f64,
    pub ssim: f64,
    pub l1_cumulative_mean: f64,
    pub ssim_cumulative_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub points: Vec<FidelityPoint>,
}

impl FidelityCurve {
    /// `index,l1,ssim` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,l1,ssim\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.index, p.l1, p.ssim));
        }
        out
    }
}

/// Compares frames index by index over the shorter of the two videos.
pub fn fidelity_curve(
    generated: &VideoClip,
    truth: &VideoClip,
) -> Result<FidelityCurve, FidelityError> {
    let n = generated.len().min(truth.len());
    if n == 0 {
        return Err(FidelityError::EmptyOverlap);
    }
    let mut points = Vec::with_capacity(n);
    let (mut l1_sum, mut ssim_sum) = (0.0, 0.0);
    for (i, (g, t)) in generated.frames().iter().zip(truth.frames()).enumerate() {
        let l1 = l1_frame(g, t)?;
        let ssim = ssim_frame(g, t)?;
        l1_sum += l1;
        ssim_sum += ssim;
        points.push(FidelityPoint {
            index: i,
            l1,
            ssim,
            l1_cumulative_mean: l1_sum / (i + 1) as f64,
            ssim_cumulative_mean: ssim_sum / (i + 1) as f64,
        });
    }
    Ok(FidelityCurve { points })
}
