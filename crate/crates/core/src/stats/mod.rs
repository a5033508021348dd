//! Success rates, correlation, ranking consistency and agreement statistics.
//!
//! Sample standard deviations use the n−1 denominator throughout.

mod agreement;
mod correlation;
mod rates;
mod report;

use thiserror::Error;

pub use agreement::{bland_altman, icc_2_1, mbe, BlandAltman, MeanBiasError, RatingMatrix};
pub use correlation::{mmrv, pearson, Correlation};
pub use rates::{majority_vote, seed_averaged_sr, success_rate};
pub use report::{
    campaign_report, CampaignReport, MethodReport, PairedEvaluation, SrEntry, Summary,
    TaskCorrelation, UnmatchedPair,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("input is empty")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("rating matrix is degenerate: {0}")]
    Degenerate(String),
    #[error("non-finite input value")]
    NonFinite,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n−1). Zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}
