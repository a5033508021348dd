use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wmeval_core::mock::sandbox::{
    decode_state, initial_layout, sandbox_render, sandbox_step, to_pixel, SandboxParams,
    SandboxState, GOAL_HALF, GRIPPER_HALF, LAYOUT_MIN_TASK_DISTANCE, NEEDLE_HALF,
};
use wmeval_core::{Action, ArmDelta};

const SIDE: u32 = 64;

fn point() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(0.0f64..=1.0)
}

fn state() -> impl Strategy<Value = SandboxState> {
    (point(), point(), point(), any::<bool>(), 0.0f64..=1.0).prop_map(
        |(gripper, needle, goal, grasped, jaw)| {
            let grasped = grasped && jaw < 0.5;
            SandboxState {
                gripper,
                needle: if grasped { gripper } else { needle },
                goal,
                grasped,
                jaw,
            }
        },
    )
}

fn pixel_gap(a: [f64; 2], b: [f64; 2]) -> i64 {
    let dx = (to_pixel(a[0], SIDE) - to_pixel(b[0], SIDE)).abs();
    let dy = (to_pixel(a[1], SIDE) - to_pixel(b[1], SIDE)).abs();
    dx.max(dy)
}

fn within_one_pixel(decoded: [f64; 2], truth: [f64; 2]) -> bool {
    (0..2).all(|i| (decoded[i] - truth[i]).abs() * SIDE as f64 <= 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn decode_recovers_separated_entities(s in state()) {
        prop_assume!(!s.grasped);
        prop_assume!(pixel_gap(s.gripper, s.needle) > GRIPPER_HALF + NEEDLE_HALF);
        prop_assume!(pixel_gap(s.gripper, s.goal) > GRIPPER_HALF + GOAL_HALF);
        prop_assume!(pixel_gap(s.needle, s.goal) > NEEDLE_HALF + GOAL_HALF);
        let d = decode_state(&sandbox_render(&s, SIDE, SIDE)).unwrap();
        prop_assert!(within_one_pixel(d.gripper, s.gripper));
        prop_assert!(within_one_pixel(d.needle, s.needle));
        prop_assert!(within_one_pixel(d.goal, s.goal));
        prop_assert_eq!(d.is_closed(), s.is_closed());
        prop_assert!(!d.grasped);
    }

    #[test]
    fn decoded_state_renders_the_same_frame(s in state()) {
        let frame = sandbox_render(&s, SIDE, SIDE);
        let d = decode_state(&frame).unwrap();
        prop_assert!(within_one_pixel(d.gripper, s.gripper));
        prop_assert_eq!(d.grasped, s.grasped);
        prop_assert_eq!(sandbox_render(&d, SIDE, SIDE), frame);
    }

    #[test]
    fn layouts_respect_separation(seed in any::<u64>()) {
        let s = initial_layout(seed);
        let dist = ((s.needle[0] - s.goal[0]).powi(2) + (s.needle[1] - s.goal[1]).powi(2)).sqrt();
        prop_assert!(dist >= LAYOUT_MIN_TASK_DISTANCE);
        prop_assert!(!s.grasped && !s.is_closed());
        prop_assert_eq!(initial_layout(seed), s);
    }
}

fn close_jaw() -> Action {
    Action::single(ArmDelta::translate([0.0, 0.0, 0.0], 0.0))
}

#[test]
fn grasp_attaches_only_near_the_needle() {
    let params = SandboxParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut s = initial_layout(3);
    let far = sandbox_step(&s, &close_jaw(), &params, &mut rng);
    assert!(far.is_closed() && !far.grasped);

    s.gripper = s.needle;
    let near = sandbox_step(&s, &close_jaw(), &params, &mut rng);
    assert!(near.grasped);
    let moved = sandbox_step(
        &near,
        &Action::single(ArmDelta::translate([0.05, 0.0, 0.0], 0.0)),
        &params,
        &mut rng,
    );
    assert_eq!(moved.needle, moved.gripper);
    let released = sandbox_step(
        &moved,
        &Action::single(ArmDelta::still(1.0)),
        &params,
        &mut rng,
    );
    assert!(!released.grasped);
}

#[test]
fn false_attach_fires_only_when_closing() {
    let params = SandboxParams {
        false_attach_prob: 1.0,
        ..SandboxParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = initial_layout(3);
    let closed = sandbox_step(&s, &close_jaw(), &params, &mut rng);
    assert!(closed.grasped);
    assert_eq!(closed.needle, closed.gripper);

    let already_closed = SandboxState { jaw: 0.0, ..s };
    let stays = sandbox_step(&already_closed, &close_jaw(), &params, &mut rng);
    assert!(!stays.grasped);
}
