use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::{check_finite, mean, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value from Student's t with n−2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFew { need: 3, got: n });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p_value: t_test_p(r, n),
        n,
    })
}

fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return 0.0;
    }
    let t2 = r * r * df / one_minus;
    beta_reg(df / 2.0, 0.5, df / (df + t2))
}

/// Mean maximum rank violation between simulated and real success rates.
///
/// A pair (i, j) is violated when `sim_i < sim_j` and `real_i < real_j`
/// disagree; its weight is `|real_i − real_j|`. Each policy contributes its
/// worst violation and the result is the mean over policies.
pub fn mmrv(sim: &[f64], real: &[f64]) -> Result<f64, StatsError> {
    if sim.len() != real.len() {
        return Err(StatsError::LengthMismatch(sim.len(), real.len()));
    }
    let n = sim.len();
    if n < 2 {
        return Err(StatsError::TooFew { need: 2, got: n });
    }
    check_finite(sim)?;
    check_finite(real)?;
    let total: f64 = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (sim[i] < sim[j]) != (real[i] < real[j]))
                .map(|j| (real[i] - real[j]).abs())
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / n as f64)
}
