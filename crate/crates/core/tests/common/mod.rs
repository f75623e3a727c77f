#![allow(dead_code)]

use hkfade::channel::{FadingLaw, FadingState, PowerMode, StateClass};
use hkfade::rates::{PowerPolicy, SplitPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const CLASSES: [StateClass; 4] = [
    StateClass::Strong,
    StateClass::Weak,
    StateClass::MixedRx1WeakRx2Strong,
    StateClass::MixedRx1StrongRx2Weak,
];

/// Cross-gain multipliers relative to the interferer's direct gain.
#[derive(Clone, Copy)]
pub struct Spread {
    pub strong: (f64, f64),
    pub weak: (f64, f64),
}

pub const DEFAULT_SPREAD: Spread = Spread {
    strong: (1.0, 4.0),
    weak: (0.05, 0.95),
};

pub fn state_of(rng: &mut ChaCha8Rng, class: StateClass, spread: Spread) -> FadingState {
    let g11 = rng.random_range(0.2..2.5);
    let g22 = rng.random_range(0.2..2.5);
    let (rx1_strong, rx2_strong) = match class {
        StateClass::Strong => (true, true),
        StateClass::Weak => (false, false),
        StateClass::MixedRx1WeakRx2Strong => (false, true),
        StateClass::MixedRx1StrongRx2Weak => (true, false),
    };
    let mut mult = |strong: bool| {
        let (lo, hi) = if strong { spread.strong } else { spread.weak };
        rng.random_range(lo..hi)
    };
    let g12 = g22 * mult(rx1_strong);
    let g21 = g11 * mult(rx2_strong);
    FadingState::new(g11, g12, g21, g22)
}

pub fn probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

pub fn mode(rng: &mut ChaCha8Rng) -> PowerMode {
    if rng.random_bool(0.5) {
        PowerMode::AveragePower
    } else {
        PowerMode::PerStatePower
    }
}

pub fn law_with(rng: &mut ChaCha8Rng, classes: &[StateClass], spread: Spread, mode: PowerMode) -> FadingLaw {
    let states = classes.iter().map(|&c| state_of(rng, c, spread)).collect();
    let p = probs(rng, classes.len());
    let budgets = [rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)];
    FadingLaw::new(states, p, budgets, mode).unwrap()
}

/// States of independently random classes.
pub fn any_law(rng: &mut ChaCha8Rng, n: usize) -> FadingLaw {
    let classes: Vec<StateClass> = (0..n).map(|_| CLASSES[rng.random_range(0..4)]).collect();
    let m = mode(rng);
    law_with(rng, &classes, DEFAULT_SPREAD, m)
}

/// A feasible power policy drawn uniformly per entry, then scaled into the
/// budget.
pub fn feasible_power(rng: &mut ChaCha8Rng, law: &FadingLaw) -> PowerPolicy {
    let n = law.len();
    let raw: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let budgets = law.budgets();
    let mut out = vec![[0.0; 2]; n];
    for k in 0..2 {
        let scale = match law.mode {
            PowerMode::PerStatePower => budgets[k],
            PowerMode::AveragePower => {
                let mean: f64 = raw.iter().zip(&law.probs).map(|(r, p)| r[k] * p).sum();
                // stay strictly inside the budget
                0.999 * budgets[k] / mean
            }
        };
        for (o, r) in out.iter_mut().zip(&raw) {
            o[k] = r[k] * scale;
        }
    }
    PowerPolicy(out)
}

pub fn random_split(rng: &mut ChaCha8Rng, n: usize) -> SplitPolicy {
    SplitPolicy((0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect())
}
