use serde::{Deserialize, Serialize};

use super::{check_finite, mean, sample_sd, StatsError, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanBiasError {
    pub mbe: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n: usize,
}

/// Mean of `sim − real` with a normal-approximation 95% interval. With a
/// single pair the interval collapses to the point estimate.
pub fn mbe(sim: &[f64], real: &[f64]) -> Result<MeanBiasError, StatsError> {
    let diffs = differences(sim, real)?;
    let m = mean(&diffs);
    let half = Z95 * sample_sd(&diffs) / (diffs.len() as f64).sqrt();
    Ok(MeanBiasError {
        mbe: m,
        ci95_low: m - half,
        ci95_high: m + half,
        n: diffs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

pub fn bland_altman(sim: &[f64], real: &[f64]) -> Result<BlandAltman, StatsError> {
    let diffs = differences(sim, real)?;
    if diffs.len() < 2 {
        return Err(StatsError::TooFew {
            need: 2,
            got: diffs.len(),
        });
    }
    let m = mean(&diffs);
    let sd = sample_sd(&diffs);
    Ok(BlandAltman {
        mean_diff: m,
        sd_diff: sd,
        loa_low: m - Z95 * sd,
        loa_high: m + Z95 * sd,
    })
}

fn differences(sim: &[f64], real: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sim.len() != real.len() {
        return Err(StatsError::LengthMismatch(sim.len(), real.len()));
    }
    if sim.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(sim)?;
    check_finite(real)?;
    Ok(sim.iter().zip(real).map(|(s, r)| s - r).collect())
}

/// Subjects × raters, no missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl RatingMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, StatsError> {
        let n = rows.len();
        if n < 2 {
            return Err(StatsError::TooFew { need: 2, got: n });
        }
        let k = rows[0].len();
        if k < 2 {
            return Err(StatsError::TooFew { need: 2, got: k });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(StatsError::LengthMismatch(k, bad.len()));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        check_finite(&values)?;
        Ok(Self { n, k, values })
    }

    pub fn subjects(&self) -> usize {
        self.n
    }

    pub fn raters(&self) -> usize {
        self.k
    }

    pub fn get(&self, subject: usize, rater: usize) -> f64 {
        self.values[subject * self.k + rater]
    }
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
///
/// A matrix whose cells are all equal is perfect agreement and yields 1.0.
pub fn icc_2_1(m: &RatingMatrix) -> Result<f64, StatsError> {
    let (n, k) = (m.n, m.k);
    let (nf, kf) = (n as f64, k as f64);
    let grand = mean(&m.values);
    if m.values.iter().all(|&v| v == m.values[0]) {
        return Ok(1.0);
    }
    let row_means: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|j| m.get(i, j)).sum::<f64>() / kf)
        .collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| m.get(i, j)).sum::<f64>() / nf)
        .collect();
    let ss_rows = kf * row_means.iter().map(|r| (r - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|c| (c - grand).powi(2)).sum::<f64>();
    let mut ss_err = 0.0;
    for i in 0..n {
        for j in 0..k {
            ss_err += (m.get(i, j) - row_means[i] - col_means[j] + grand).powi(2);
        }
    }
    let ms_r = ss_rows / (nf - 1.0);
    let ms_c = ss_cols / (kf - 1.0);
    let ms_e = ss_err / ((nf - 1.0) * (kf - 1.0));
    let denom = ms_r + (kf - 1.0) * ms_e + kf * (ms_c - ms_e) / nf;
    if denom.abs() < 1e-300 {
        return Err(StatsError::Degenerate(
            "zero denominator in ICC(2,1)".into(),
        ));
    }
    Ok((ms_r - ms_e) / denom)
}
