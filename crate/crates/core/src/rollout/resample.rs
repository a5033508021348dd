//! Rate conversion and horizon truncation of policy action chunks.
//!
//! Source actions are assigned to 100 ms target bins by their timestamp
//! (`i / rate_hz`); each bin's actions are composed into one. A 30 Hz stream
//! gives three actions per bin, a 15 Hz stream alternates two and one.
//! Composition sums translations, multiplies rotations in order and keeps the
//! last (absolute) jaw value, so the net pose of the chunk is preserved.

use crate::action::{Action, ActionChunk, ActionError, ArmDelta, Quat};

pub const TARGET_RATE_HZ: u32 = 10;
pub const DEFAULT_HORIZON: usize = 12;

fn compose(group: &[Action]) -> Action {
    let arms = group[0].arm_count();
    let composed = (0..arms)
        .map(|a| {
            let mut t = [0.0; 3];
            let mut q = Quat::IDENTITY;
            for action in group {
                let arm = &action.arms[a];
                for (acc, v) in t.iter_mut().zip(arm.translation) {
                    *acc += v;
                }
                q = q.mul(arm.rotation);
            }
            ArmDelta {
                translation: t,
                rotation: q.normalized(),
                jaw: group[group.len() - 1].arms[a].jaw,
            }
        })
        .collect();
    Action { arms: composed }
}

/// Downsamples `chunk` to `target_hz` by composing actions within each target bin.
pub fn resample_chunk(chunk: &ActionChunk, target_hz: u32) -> Result<ActionChunk, ActionError> {
    chunk.validate()?;
    if target_hz == 0 || chunk.rate_hz < target_hz {
        return Err(ActionError::Rate(chunk.rate_hz));
    }
    if chunk.rate_hz == target_hz {
        return Ok(chunk.clone());
    }
    let bin_of = |i: usize| (i as u64 * target_hz as u64 / chunk.rate_hz as u64) as usize;
    let mut out = Vec::new();
    let mut start = 0;
    while start < chunk.actions.len() {
        let bin = bin_of(start);
        let mut end = start + 1;
        while end < chunk.actions.len() && bin_of(end) == bin {
            end += 1;
        }
        out.push(compose(&chunk.actions[start..end]));
        start = end;
    }
    Ok(ActionChunk {
        actions: out,
        rate_hz: target_hz,
    })
}

/// First `horizon` actions; shorter chunks are padded by repeating the last action.
pub fn truncate_to_horizon(chunk: &ActionChunk, horizon: usize) -> ActionChunk {
    let mut actions: Vec<Action> = chunk.actions.iter().take(horizon).cloned().collect();
    if let Some(last) = actions.last().cloned() {
        actions.resize(horizon, last);
    }
    ActionChunk {
        actions,
        rate_hz: chunk.rate_hz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(translations: &[[f64; 3]], rate: u32) -> ActionChunk {
        ActionChunk::new(
            translations
                .iter()
                .map(|&t| Action::single(ArmDelta::translate(t, 1.0)))
                .collect(),
            rate,
        )
        .unwrap()
    }

    #[test]
    fn zero_deltas_at_30hz_collapse_three_to_one() {
        let c = chunk(&[[0.0; 3]; 6], 30);
        let r = resample_chunk(&c, 10).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.rate_hz, 10);
        for a in &r.actions {
            assert_eq!(a.arms[0], ArmDelta::still(1.0));
        }
    }

    #[test]
    fn thirty_hz_group_sums_translations() {
        let c = chunk(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 30);
        let r = resample_chunk(&c, 10).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.actions[0].arms[0].translation, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn fifteen_hz_alternates_two_and_one() {
        let t: Vec<[f64; 3]> = (0..6).map(|i| [i as f64, 0.0, 0.0]).collect();
        let r = resample_chunk(&chunk(&t, 15), 10).unwrap();
        let xs: Vec<f64> = r.actions.iter().map(|a| a.arms[0].translation[0]).collect();
        assert_eq!(xs, vec![0.0 + 1.0, 2.0, 3.0 + 4.0, 5.0]);
    }

    #[test]
    fn jaw_takes_last_value_of_group() {
        let mut c = chunk(&[[0.0; 3]; 3], 30);
        for (a, j) in c.actions.iter_mut().zip([0.9, 0.1, 0.4]) {
            a.arms[0].jaw = j;
        }
        let r = resample_chunk(&c, 10).unwrap();
        assert_eq!(r.actions[0].arms[0].jaw, 0.4);
    }

    #[test]
    fn rejects_upsampling_and_empty() {
        assert!(resample_chunk(&chunk(&[[0.0; 3]], 5), 10).is_err());
        let empty = ActionChunk {
            actions: vec![],
            rate_hz: 30,
        };
        assert_eq!(
            resample_chunk(&empty, 10).unwrap_err(),
            ActionError::EmptyChunk
        );
    }

    #[test]
    fn truncation_and_padding() {
        let t: Vec<[f64; 3]> = (0..50).map(|i| [i as f64, 0.0, 0.0]).collect();
        let long = chunk(&t, 10);
        let cut = truncate_to_horizon(&long, 12);
        assert_eq!(cut.actions, long.actions[..12].to_vec());

        let exact = chunk(&t[..12], 10);
        assert_eq!(truncate_to_horizon(&exact, 12), exact);

        let short = chunk(&t[..7], 10);
        let padded = truncate_to_horizon(&short, 12);
        assert_eq!(padded.len(), 12);
        assert_eq!(padded.actions[..7], short.actions[..]);
        assert!(padded.actions[7..].iter().all(|a| a == &short.actions[6]));
    }
}
