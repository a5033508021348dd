use super::StatsError;

fn fraction(outcomes: &[bool]) -> f64 {
    outcomes.iter().filter(|&&o| o).count() as f64 / outcomes.len() as f64
}

pub fn success_rate(outcomes: &[bool]) -> Result<f64, StatsError> {
    if outcomes.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(fraction(outcomes))
}

/// Mean over trials of each trial's success fraction (all raters and seeds pooled).
pub fn seed_averaged_sr(trials: &[Vec<bool>]) -> Result<f64, StatsError> {
    if trials.is_empty() || trials.iter().any(|t| t.is_empty()) {
        return Err(StatsError::Empty);
    }
    Ok(trials.iter().map(|t| fraction(t)).sum::<f64>() / trials.len() as f64)
}

/// Strictly more than half of the labels are successes.
pub fn majority_vote(labels: &[bool]) -> Result<bool, StatsError> {
    if labels.is_empty() {
        return Err(StatsError::Empty);
    }
    let wins = labels.iter().filter(|&&o| o).count();
    Ok(2 * wins > labels.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: bool = true;
    const F: bool = false;

    #[test]
    fn rates() {
        assert_eq!(success_rate(&[T, T, F, F]).unwrap(), 0.5);
        assert_eq!(success_rate(&[T; 5]).unwrap(), 1.0);
        let seven_of_nine = [T, T, T, T, T, T, T, F, F];
        assert!((success_rate(&seven_of_nine).unwrap() - 7.0 / 9.0).abs() < 1e-15);
        assert!(success_rate(&[]).is_err());
    }

    #[test]
    fn seed_averaging() {
        assert_eq!(seed_averaged_sr(&vec![vec![T; 6]; 10]).unwrap(), 1.0);
        let mut trials = vec![vec![F; 6]; 10];
        trials[0] = vec![T, T, T, F, F, F];
        assert!((seed_averaged_sr(&trials).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(seed_averaged_sr(&[vec![T, F]]).unwrap(), 0.5);
    }

    #[test]
    fn strict_majority() {
        assert!(majority_vote(&[T, T, T, T, F, F]).unwrap());
        assert!(!majority_vote(&[T, T, T, F, F, F]).unwrap());
        assert!(majority_vote(&[T]).unwrap());
    }
}
