use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{LabelRecord, CLASSIFIER_RATER};
use crate::rollout::RolloutKey;
use crate::stats::{icc_2_1, majority_vote, seed_averaged_sr, RatingMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterSr {
    pub rater_id: String,
    pub policy_id: String,
    pub task: String,
    pub sr: f64,
    pub labels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialVote {
    pub policy_id: String,
    pub task: String,
    pub trial: u32,
    pub labels: usize,
    pub successes: usize,
    pub success: bool,
}

/// Inter-rater view of the human labels of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub raters: Vec<String>,
    /// Rollouts labelled by every rater; these form the ICC matrix rows.
    pub subjects: Vec<String>,
    pub icc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icc_note: Option<String>,
    pub per_rater: Vec<RaterSr>,
    pub majority: Vec<TrialVote>,
}

type Group = (String, String, u32);

fn group_of(key: &RolloutKey) -> Group {
    (key.policy_id.clone(), key.task.clone(), key.trial)
}

/// Per-(policy, task) seed-averaged success rates from `(key, outcome)` pairs.
pub(crate) fn success_rates<'a>(
    outcomes: impl Iterator<Item = (&'a RolloutKey, bool)>,
) -> BTreeMap<(String, String), (f64, usize)> {
    let mut trials: BTreeMap<(String, String), BTreeMap<u32, Vec<bool>>> = BTreeMap::new();
    for (key, ok) in outcomes {
        trials
            .entry((key.policy_id.clone(), key.task.clone()))
            .or_default()
            .entry(key.trial)
            .or_default()
            .push(ok);
    }
    trials
        .into_iter()
        .map(|(pt, by_trial)| {
            let sets: Vec<Vec<bool>> = by_trial.into_values().collect();
            let n = sets.iter().map(Vec::len).sum();
            (
                pt,
                (seed_averaged_sr(&sets).expect("non-empty trial sets"), n),
            )
        })
        .collect()
}

pub fn agreement(labels: &[LabelRecord]) -> AgreementSummary {
    let human: Vec<(RolloutKey, &LabelRecord)> = labels
        .iter()
        .filter(|l| l.rater_id != CLASSIFIER_RATER)
        .filter_map(|l| Some((RolloutKey::parse(&l.rollout_id)?, l)))
        .collect();
    let raters: Vec<String> = human
        .iter()
        .map(|(_, l)| l.rater_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut by_rollout: BTreeMap<&RolloutKey, BTreeMap<&str, bool>> = BTreeMap::new();
    for (key, l) in &human {
        by_rollout
            .entry(key)
            .or_default()
            .insert(&l.rater_id, l.outcome);
    }
    let complete: Vec<(&RolloutKey, Vec<f64>)> = by_rollout
        .iter()
        .filter(|(_, r)| r.len() == raters.len())
        .map(|(k, r)| (*k, r.values().map(|&o| if o { 1.0 } else { 0.0 }).collect()))
        .collect();
    let (icc, icc_note) = if raters.len() < 2 {
        (None, Some("fewer than two raters".to_owned()))
    } else {
        let rows: Vec<Vec<f64>> = complete.iter().map(|(_, r)| r.clone()).collect();
        match RatingMatrix::new(&rows).and_then(|m| icc_2_1(&m)) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };

    let mut per_rater = Vec::new();
    for rater in &raters {
        let mine = human
            .iter()
            .filter(|(_, l)| &l.rater_id == rater)
            .map(|(k, l)| (k, l.outcome));
        for ((policy_id, task), (sr, n)) in success_rates(mine) {
            per_rater.push(RaterSr {
                rater_id: rater.clone(),
                policy_id,
                task,
                sr,
                labels: n,
            });
        }
    }

    let mut trials: BTreeMap<Group, Vec<bool>> = BTreeMap::new();
    for (key, l) in &human {
        trials.entry(group_of(key)).or_default().push(l.outcome);
    }
    let majority = trials
        .into_iter()
        .map(|((policy_id, task, trial), votes)| TrialVote {
            policy_id,
            task,
            trial,
            labels: votes.len(),
            successes: votes.iter().filter(|&&v| v).count(),
            success: majority_vote(&votes).expect("non-empty votes"),
        })
        .collect();

    AgreementSummary {
        raters,
        subjects: complete.iter().map(|(k, _)| k.id()).collect(),
        icc,
        icc_note,
        per_rater,
        majority,
    }
}
