//! Separable coding: independent HK codes in every fading state, so the
//! split is optimized state by state and only the power couples states
//! through the budget.

use crate::channel::{FadingLaw, FadingState};
use crate::rates::{self, state_sum_rates, Dual, PowerPolicy, SplitPolicy};

use super::{
    checked_law, default_powers, project_power, reduce_best, Candidate, Diagnostics, Method, OptimizationResult,
    OptimizeError, OptimizeOptions,
};

const SPLIT_GRID: usize = 11;
const REFINE_TOL: f64 = 1e-7;
/// Outer iterations between full re-scans of the split grid.
const RESCAN_EVERY: usize = 64;

fn state_value(g: &FadingState, a: [f64; 2], p: [f64; 2]) -> f64 {
    state_sum_rates(g, a, p).into_iter().fold(f64::INFINITY, f64::min)
}

/// Compass search on the unit square from `from`, starting with step `h`.
fn refine(g: &FadingState, p: [f64; 2], from: [f64; 2], mut h: f64) -> ([f64; 2], f64) {
    let mut a = from;
    let mut v = state_value(g, a, p);
    while h >= REFINE_TOL {
        let mut moved = false;
        for (k, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            let mut trial = a;
            trial[k] = (trial[k] + sign * h).clamp(0.0, 1.0);
            if trial == a {
                continue;
            }
            let tv = state_value(g, trial, p);
            if tv > v {
                a = trial;
                v = tv;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (a, v)
}

/// Best split for one state at fixed power: an 11x11 grid scan (plus an
/// optional warm start) followed by compass refinement.
pub fn best_state_split(g: &FadingState, p: [f64; 2], warm: Option<[f64; 2]>) -> ([f64; 2], f64) {
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    let step = 1.0 / (SPLIT_GRID - 1) as f64;
    let grid = (0..SPLIT_GRID).flat_map(|i| (0..SPLIT_GRID).map(move |j| [i as f64 * step, j as f64 * step]));
    for a in warm.into_iter().chain(grid) {
        let v = state_value(g, a, p);
        if v > best.1 {
            best = (a, v);
        }
    }
    refine(g, p, best.0, 0.5 * step)
}

/// Separable objective `E[max_alpha per_state_sum_rate]` at a fixed power
/// policy, with the maximizing per-state splits.
pub fn separable_objective(law: &FadingLaw, power: &PowerPolicy) -> (SplitPolicy, f64) {
    let mut split = Vec::with_capacity(law.len());
    let mut value = 0.0;
    for ((g, prob), p) in law.states.iter().zip(&law.probs).zip(&power.0) {
        let (a, v) = best_state_split(g, *p, None);
        split.push(a);
        value += prob * v;
    }
    (SplitPolicy(split), value)
}

fn evaluate(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> f64 {
    law.expect(|i, g| state_value(g, split.0[i], power.0[i]))
}

fn ascend_separable(law: &FadingLaw, power: PowerPolicy, label: String, opts: &OptimizeOptions) -> Candidate {
    let n = law.len();
    let budgets = law.budgets();
    let mut power = project_power(&power.0, law);
    let (mut split, mut value) = separable_objective(law, &power);
    let mut best = Candidate {
        split: split.clone(),
        power: power.clone(),
        value,
        iters: 0,
        final_step: 0.0,
        label,
    };
    let mut step = opts.step_a;
    for t in 0..opts.iters {
        best.iters = t as u64 + 1;
        let mut dir = vec![[0.0; 2]; n];
        let mut norm2 = 0.0;
        for (s, dir_s) in dir.iter_mut().enumerate() {
            let g = &law.states[s];
            let a = split.0[s];
            let p = power.0[s];
            let vars = [Dual::var(p[0], 2), Dual::var(p[1], 3)];
            let sr =
                rates::sum_rates_from_bounds(&rates::state_bounds(g, [Dual::var(a[0], 0), Dual::var(a[1], 1)], vars));
            let f = sr.iter().map(|d| d.v).fold(f64::INFINITY, f64::min);
            let active: Vec<&Dual> = sr.iter().filter(|d| d.v <= f + opts.tol).collect();
            let w = 1.0 / active.len() as f64;
            for k in 0..2 {
                // Danskin: derivative of the inner max at the maximizing split
                let d: f64 = active.iter().map(|x| x.d[2 + k]).sum::<f64>() * w;
                dir_s[k] = d * budgets[k];
                norm2 += dir_s[k] * dir_s[k];
            }
        }
        // also stops on a NaN norm
        if norm2.is_nan() || norm2 <= 1e-30 {
            break;
        }
        step = opts.step_a / (1.0 + t as f64 / opts.step_b);
        let scale = step / norm2.sqrt();
        let raw: Vec<[f64; 2]> = (0..n)
            .map(|s| {
                [
                    power.0[s][0] + scale * dir[s][0] * budgets[0],
                    power.0[s][1] + scale * dir[s][1] * budgets[1],
                ]
            })
            .collect();
        power = project_power(&raw, law);
        let rescan = (t + 1) % RESCAN_EVERY == 0;
        value = 0.0;
        for s in 0..n {
            let g = &law.states[s];
            let (a, v) = if rescan {
                best_state_split(g, power.0[s], Some(split.0[s]))
            } else {
                refine(g, power.0[s], split.0[s], 0.02)
            };
            split.0[s] = a;
            value += law.probs[s] * v;
        }
        if value > best.value {
            best.value = value;
            best.split = split.clone();
            best.power = power.clone();
        }
    }
    // final full inner maximization at the best power
    let (split, _) = separable_objective(law, &best.power);
    let polished = evaluate(law, &split, &best.power);
    if polished > best.value {
        best.split = split;
    }
    best.value = evaluate(law, &best.split, &best.power);
    best.final_step = step;
    best
}

pub fn maximize_separable(law: &FadingLaw, opts: &OptimizeOptions) -> Result<OptimizationResult, OptimizeError> {
    maximize_separable_with_starts(law, opts, &[])
}

/// Separable maximization with additional power policies as starts.
pub fn maximize_separable_with_starts(
    law: &FadingLaw,
    opts: &OptimizeOptions,
    extra: &[PowerPolicy],
) -> Result<OptimizationResult, OptimizeError> {
    opts.validate()?;
    checked_law(law)?;
    let (mut powers, budget_unused) = default_powers(law, opts)?;
    for (i, p) in extra.iter().enumerate() {
        if p.0.len() != law.len() {
            return Err(rates::RateError::PolicyLengthMismatch {
                expected: law.len(),
                got: p.0.len(),
            }
            .into());
        }
        powers.push((p.clone(), format!("extra/{i}")));
    }
    let count = powers.len();
    let cands = opts.exec.map(powers, |(p, l)| ascend_separable(law, p, l, opts));
    let iterations = cands.iter().map(|c| c.iters).sum();
    let best = reduce_best(cands).expect("at least one start");
    Ok(OptimizationResult::assemble(
        law,
        best.split,
        best.power,
        best.value,
        opts.tol,
        Method::Subgradient,
        Diagnostics {
            iterations,
            restarts: count,
            final_step: best.final_step,
            feasibility_residual: 0.0,
            budget_unused,
            best_start: best.label,
        },
    ))
}
