//! Local refinement of an ascent result by sequential linear programming.
//!
//! Each step linearizes every active-mask bound around the current point and
//! solves `max t` subject to `S_m + grad S_m . d >= t`, the power
//! constraints and a box trust region on `d`. The step is taken only if the
//! true objective improves; the radius adapts to the ratio of actual to
//! predicted gain.

use super::{project_power, Candidate, Problem};
use crate::channel::{FadingLaw, PowerMode};
use crate::rates::{self, PowerPolicy, SplitPolicy};
use microlp::{ComparisonOp, OptimizationDirection};

const MAX_STEPS: usize = 100;
const RADIUS_START: f64 = 0.05;
const RADIUS_MAX: f64 = 0.25;
const RADIUS_MIN: f64 = 1e-9;
const MIN_PREDICTED_GAIN: f64 = 1e-13;

pub(crate) fn polish(law: &FadingLaw, problem: &Problem, best: &mut Candidate) {
    let mut split = best.split.clone();
    let mut power = best.power.clone();
    let mut value = best.value;
    let mut radius = RADIUS_START;
    let mut steps = 0;
    while steps < MAX_STEPS && radius >= RADIUS_MIN {
        steps += 1;
        let Some((d_split, d_power, predicted)) = lp_step(law, problem, &split, &power, radius) else {
            break;
        };
        let gain = predicted - value;
        if gain < MIN_PREDICTED_GAIN {
            break;
        }
        let trial_split = SplitPolicy(
            split
                .0
                .iter()
                .zip(&d_split)
                .map(|(a, d)| [(a[0] + d[0]).clamp(0.0, 1.0), (a[1] + d[1]).clamp(0.0, 1.0)])
                .collect(),
        );
        let raw: Vec<[f64; 2]> = power
            .0
            .iter()
            .zip(&d_power)
            .map(|(p, d)| [p[0] + d[0], p[1] + d[1]])
            .collect();
        let trial_power = project_power(&raw, law);
        let trial = problem.objective(&rates::sum_rates_unchecked(law, &trial_split, &trial_power));
        let ratio = (trial - value) / gain;
        if trial > value {
            split = trial_split;
            power = trial_power;
            value = trial;
            if ratio > 0.75 {
                radius = (2.0 * radius).min(RADIUS_MAX);
            } else if ratio < 0.25 {
                radius *= 0.25;
            }
        } else {
            radius *= 0.25;
        }
    }
    best.iters += steps as u64;
    if value > best.value {
        best.value = value;
        best.split = split;
        best.power = power;
    }
}

/// Split step, power step and the model's predicted objective.
type Step = (Vec<[f64; 2]>, Vec<[f64; 2]>, f64);

/// Solves the linearized subproblem.
fn lp_step(law: &FadingLaw, problem: &Problem, split: &SplitPolicy, power: &PowerPolicy, radius: f64) -> Option<Step> {
    let n = law.len();
    let budgets = law.budgets();
    let jac = rates::sum_rate_jacobian(law, split, power);
    let mut lp = microlp::Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let mut vars = Vec::with_capacity(n);
    for s in 0..n {
        let a = split.0[s];
        let p = power.0[s];
        let mut v = [t; 4];
        for k in 0..2 {
            let (lo, hi) = if problem.fixed[s][k].is_some() {
                (0.0, 0.0)
            } else {
                ((-radius).max(-a[k]), radius.min(1.0 - a[k]))
            };
            v[k] = lp.add_var(0.0, (lo.min(0.0), hi.max(0.0)));
            let reach = radius * budgets[k];
            let hi = match law.mode {
                PowerMode::AveragePower => reach,
                PowerMode::PerStatePower => reach.min(budgets[k] - p[k]),
            };
            v[2 + k] = lp.add_var(0.0, ((-reach).max(-p[k]).min(0.0), hi.max(0.0)));
        }
        vars.push(v);
    }
    for m in (0..6).filter(|&m| problem.mask[m]) {
        let mut terms = vec![(t, 1.0)];
        for (s, v) in vars.iter().enumerate() {
            for (var, g) in v.iter().zip(jac.grad[m][s]) {
                if g != 0.0 {
                    terms.push((*var, -g));
                }
            }
        }
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, jac.values[m]);
    }
    if law.mode == PowerMode::AveragePower {
        for k in 0..2 {
            let slack = (budgets[k] - power.average(law, k)).max(0.0);
            let terms: Vec<_> = vars.iter().zip(&law.probs).map(|(v, &q)| (v[2 + k], q)).collect();
            lp.add_constraint(terms.as_slice(), ComparisonOp::Le, slack);
        }
    }
    let solution = lp.solve().ok()?.into_solution().ok()?;
    let d_split = vars
        .iter()
        .map(|v| [solution.var_value(v[0]), solution.var_value(v[1])])
        .collect();
    let d_power = vars
        .iter()
        .map(|v| [solution.var_value(v[2]), solution.var_value(v[3])])
        .collect();
    Some((d_split, d_power, solution.var_value(t)))
}
