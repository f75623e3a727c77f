use hkfade::channel::{classify_state, FadingLaw, FadingState, PowerMode, StateClass, User};
use hkfade::optimize::{project_power, waterfill};
use hkfade::rates::{per_state_sum_rate, rate_bounds, sum_rate_bounds, PowerPolicy, SplitPolicy};
use proptest::prelude::*;

fn gain() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.0..5.0f64]
}

fn state() -> impl Strategy<Value = FadingState> {
    (gain(), gain(), gain(), gain()).prop_map(|(a, b, c, d)| FadingState::new(a, b, c, d))
}

fn power_mode() -> impl Strategy<Value = PowerMode> {
    prop_oneof![Just(PowerMode::AveragePower), Just(PowerMode::PerStatePower)]
}

/// A law with 1..=4 states together with a feasible policy pair.
fn instance() -> impl Strategy<Value = (FadingLaw, SplitPolicy, PowerPolicy)> {
    (1usize..=4)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(state(), n),
                prop::collection::vec(0.1..1.0f64, n),
                (0.0..4.0f64, 0.0..4.0f64),
                power_mode(),
                prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), n),
                prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), n),
            )
        })
        .prop_map(|(states, w, budgets, mode, split, fractions)| {
            let total: f64 = w.iter().sum();
            let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
            let law = FadingLaw::new(states, probs, [budgets.0, budgets.1], mode).unwrap();
            // per-state fractions of the budget keep every mode feasible
            let power = PowerPolicy(fractions.iter().map(|&(a, b)| [a * budgets.0, b * budgets.1]).collect());
            let split = SplitPolicy(split.iter().map(|&(a, b)| [a, b]).collect());
            (law, split, power)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bounds_swap_under_index_exchange((law, split, power) in instance()) {
        let b = rate_bounds(&law, &split, &power).unwrap();
        let s = rate_bounds(&law.swapped(), &split.swapped(), &power.swapped()).unwrap();
        for (i, j) in [(1, 2), (3, 4), (5, 5), (6, 7)] {
            prop_assert!((b.b(i) - s.b(j)).abs() <= 1e-12 * (1.0 + b.b(i)));
            prop_assert!((b.b(j) - s.b(i)).abs() <= 1e-12 * (1.0 + b.b(j)));
        }
    }

    #[test]
    fn bounds_are_finite_and_nonnegative((law, split, power) in instance()) {
        let b = rate_bounds(&law, &split, &power).unwrap();
        for k in 1..=7 {
            prop_assert!(b.b(k).is_finite() && b.b(k) >= 0.0);
        }
    }

    #[test]
    fn sum_rate_assembly((law, split, power) in instance()) {
        let b = rate_bounds(&law, &split, &power).unwrap();
        let s = sum_rate_bounds(&law, &split, &power).unwrap();
        prop_assert_eq!(s.s(1), b.b(1) + b.b(2));
        prop_assert_eq!(s.s(2), b.b(3));
        prop_assert_eq!(s.s(3), b.b(4));
        prop_assert_eq!(s.s(4), b.b(5));
        prop_assert_eq!(s.s(5), (b.b(6) + b.b(2)) / 2.0);
        prop_assert_eq!(s.s(6), (b.b(7) + b.b(1)) / 2.0);
        for &m in &s.argmin {
            prop_assert!(s.s(m) - s.min_value <= 1e-9);
        }
    }

    #[test]
    fn expectation_of_min_is_below_min_of_expectation((law, split, power) in instance()) {
        let lhs: f64 = law
            .states
            .iter()
            .zip(&law.probs)
            .zip(split.0.iter().zip(&power.0))
            .map(|((g, p), (a, pw))| p * per_state_sum_rate(g, *a, *pw).unwrap())
            .sum();
        let rhs = sum_rate_bounds(&law, &split, &power).unwrap().min_value;
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn classification_partitions_and_swaps(s in state()) {
        let class = classify_state(&s);
        let strong1 = s.g12 >= s.g22;
        let strong2 = s.g21 >= s.g11;
        let expected = match (strong1, strong2) {
            (true, true) => StateClass::Strong,
            (false, false) => StateClass::Weak,
            (false, true) => StateClass::MixedRx1WeakRx2Strong,
            (true, false) => StateClass::MixedRx1StrongRx2Weak,
        };
        prop_assert_eq!(class, expected);
        prop_assert_eq!(classify_state(&s.swapped()), class.swapped());
    }

    #[test]
    fn projection_is_feasible_and_idempotent(
        (law, _, _) in instance(),
        raw in prop::collection::vec((-3.0..8.0f64, -3.0..8.0f64), 4),
    ) {
        let raw: Vec<[f64; 2]> = raw.iter().take(law.len()).map(|&(a, b)| [a, b]).collect();
        prop_assume!(raw.len() == law.len());
        let p = project_power(&raw, &law);
        prop_assert!(p.residual(&law) <= 1e-9);
        let again = project_power(&p.0, &law);
        for (x, y) in p.0.iter().zip(&again.0) {
            prop_assert!((x[0] - y[0]).abs() <= 1e-12 && (x[1] - y[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn waterfilling_spends_the_budget((law, _, _) in instance()) {
        for user in [User::One, User::Two] {
            let budget = law.budget(user);
            let wf = waterfill(&law, user, budget).unwrap();
            let spent: f64 = wf.power.iter().zip(&law.probs).map(|(p, q)| p * q).sum();
            let any_gain = law.states.iter().any(|s| s.direct(user) > 0.0);
            match law.mode {
                PowerMode::AveragePower if any_gain => prop_assert!((spent - budget).abs() <= 1e-9 * (1.0 + budget)),
                PowerMode::AveragePower => prop_assert!(spent == 0.0 && wf.budget_unused == (budget > 0.0)),
                PowerMode::PerStatePower => {
                    for (p, s) in wf.power.iter().zip(&law.states) {
                        let expected = if s.direct(user) > 0.0 { budget } else { 0.0 };
                        prop_assert_eq!(*p, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn interference_free_bounds_grow_with_power(
        g11 in 0.1..5.0f64,
        g22 in 0.1..5.0f64,
        a in (0.0..=1.0f64, 0.0..=1.0f64),
        p in (0.0..3.0f64, 0.0..3.0f64),
        bump in 0.0..1.0f64,
    ) {
        let law = FadingLaw::new(vec![FadingState::new(g11, 0.0, 0.0, g22)], vec![1.0], [10.0, 10.0], PowerMode::PerStatePower).unwrap();
        let split = SplitPolicy(vec![[a.0, a.1]]);
        let lo = rate_bounds(&law, &split, &PowerPolicy(vec![[p.0, p.1]])).unwrap();
        for hi_p in [[p.0 + bump, p.1], [p.0, p.1 + bump]] {
            let hi = rate_bounds(&law, &split, &PowerPolicy(vec![hi_p])).unwrap();
            for k in 1..=7 {
                prop_assert!(hi.b(k) >= lo.b(k) - 1e-15);
            }
        }
    }
}
