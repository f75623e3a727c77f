mod common;

use common::{any_law, law_with, rng, DEFAULT_SPREAD};
use hkfade::channel::{FadingLaw, FadingState, PowerMode, StateClass};
use hkfade::optimize::{
    brute_force_oracle, joint_objective, maximize_joint, maximize_joint_with_starts, maximize_separable,
    separable_objective, OptimizeOptions, OracleGrid, Start,
};
use hkfade::rates::sum_rate_bounds;
use rand::Rng;

fn quick() -> OptimizeOptions {
    OptimizeOptions {
        restarts: 3,
        iters: 400,
        ..OptimizeOptions::default()
    }
}

fn single(g: FadingState, budgets: [f64; 2]) -> FadingLaw {
    FadingLaw::new(vec![g], vec![1.0], budgets, PowerMode::AveragePower).unwrap()
}

#[test]
fn weak_single_state_matches_fine_grid() {
    let law = single(FadingState::new(1.0, 0.05, 0.05, 1.0), [1.0, 1.0]);
    let joint = maximize_joint(&law, &OptimizeOptions::default()).unwrap();
    let oracle = brute_force_oracle(&law, &OracleGrid::uniform(11), Default::default()).unwrap();
    assert!(
        (joint.value - oracle.value).abs() <= 1e-3,
        "{} vs {}",
        joint.value,
        oracle.value
    );
}

#[test]
fn returned_points_are_feasible_and_sound() {
    let mut r = rng(17);
    for _ in 0..20 {
        let n = 1 + (r.random::<u32>() % 3) as usize;
        let law = any_law(&mut r, n);
        let joint = maximize_joint(&law, &quick()).unwrap();
        assert!(joint.power.residual(&law) <= 1e-9);
        let direct = sum_rate_bounds(&law, &joint.split, &joint.power).unwrap().min_value;
        assert!((joint.value - direct).abs() <= 1e-9);
        assert_eq!(joint.value, joint_objective(&law, &joint.split, &joint.power).unwrap());

        let sep = maximize_separable(&law, &quick()).unwrap();
        assert!(sep.power.residual(&law) <= 1e-9);
        let (_, value) = separable_objective(&law, &sep.power);
        assert!((sep.value - value).abs() <= 1e-9);
    }
}

#[test]
fn hybrid_separable_does_not_beat_joint() {
    let law = FadingLaw::uniform(
        vec![
            FadingState::new(1.0, 1.5, 2.0, 1.0),
            FadingState::new(1.0, 0.3, 0.2, 1.0),
        ],
        [1.0, 1.0],
        PowerMode::AveragePower,
    )
    .unwrap();
    let joint = maximize_joint(&law, &OptimizeOptions::default()).unwrap();
    let sep = maximize_separable(&law, &OptimizeOptions::default()).unwrap();
    assert!(sep.value <= joint.value + 1e-6, "{} > {}", sep.value, joint.value);
}

#[test]
fn single_state_separable_equals_joint() {
    let mut r = rng(5);
    for class in common::CLASSES {
        let law = law_with(&mut r, &[class], DEFAULT_SPREAD, PowerMode::AveragePower);
        let joint = maximize_joint(&law, &OptimizeOptions::default()).unwrap();
        let sep = maximize_separable(&law, &OptimizeOptions::default()).unwrap();
        assert!(
            (joint.value - sep.value).abs() <= 1e-3,
            "{class:?}: {} vs {}",
            joint.value,
            sep.value
        );
    }
}

#[test]
fn value_grows_with_budget() {
    let mut r = rng(23);
    for _ in 0..10 {
        let law = law_with(
            &mut r,
            &[StateClass::Weak, StateClass::Strong],
            DEFAULT_SPREAD,
            PowerMode::AveragePower,
        );
        let small = maximize_joint(&law, &quick()).unwrap();
        for k in 0..2 {
            let mut larger = law.clone();
            if k == 0 {
                larger.budget1 *= 1.5;
            } else {
                larger.budget2 *= 1.5;
            }
            // the smaller optimum stays feasible under the larger budget
            let warm = Start {
                split: small.split.clone(),
                power: small.power.clone(),
                label: "warm".into(),
            };
            let big = maximize_joint_with_starts(&larger, &quick(), &[warm]).unwrap();
            assert!(big.value >= small.value - 1e-12, "{} < {}", big.value, small.value);
        }
    }
}

#[test]
fn seeded_joint_dominates_its_grid() {
    let mut r = rng(31);
    for _ in 0..5 {
        let law = any_law(&mut r, 2);
        let opts = OptimizeOptions {
            oracle_grid: Some(4),
            ..quick()
        };
        let joint = maximize_joint(&law, &opts).unwrap();
        let oracle = brute_force_oracle(&law, &OracleGrid::uniform(4), Default::default()).unwrap();
        assert!(joint.value >= oracle.value - 1e-9, "{} < {}", joint.value, oracle.value);
    }
}
