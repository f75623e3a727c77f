//! Power and split optimization.
//!
//! The joint problem maximizes `min_m S_m(alpha, P)` over per-state splits
//! and feasible power policies. It is not concave, so the solver is a
//! multi-start projected supergradient ascent: structured starts taken from
//! the channel's per-state regimes, waterfilling and uniform powers, plus
//! seeded random restarts. The reported value is always the objective
//! re-evaluated at the returned policies, so it is an achievable sum-rate
//! even when it is not the global optimum.

mod oracle;
mod polish;
mod project;
mod separable;
mod waterfill;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{classify_state, validate_law, ChannelError, FadingLaw, PowerMode, StateClass, User};
use crate::exec::Exec;
use crate::rates::{self, PowerPolicy, RateError, SplitPolicy, SumRateBounds};

pub use oracle::{brute_force_oracle, brute_force_oracle_restricted, OracleGrid, DEFAULT_ORACLE_CAP};
pub use project::project_power;
pub use separable::{best_state_split, maximize_separable, maximize_separable_with_starts, separable_objective};
pub use waterfill::{waterfill, WaterfillResult};

/// Bounds closer than this to the minimum share the supergradient.
pub const RATE_EQ_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("invalid optimizer options: {0}")]
    InvalidOptions(String),
    #[error("invalid law: {0}")]
    InfeasibleLaw(#[from] ChannelError),
    #[error("oracle grid needs {evaluations} evaluations, cap is {cap}")]
    GridTooLarge { evaluations: u128, cap: u64 },
    #[error("budget {0} is negative or not finite")]
    InvalidBudget(f64),
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Ascent and restart settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeOptions {
    /// Random restarts, on top of the structured starts.
    pub restarts: usize,
    /// Ascent iterations per start.
    pub iters: usize,
    /// Step size `step_a / (1 + t / step_b)`, in units of the power budget
    /// for power coordinates and of 1 for split coordinates.
    pub step_a: f64,
    pub step_b: f64,
    /// Bounds within `tol` of the minimum are treated as active.
    pub tol: f64,
    /// When set, the best point of an exhaustive grid with this many points
    /// per axis is added as a start.
    pub oracle_grid: Option<usize>,
    pub seed: u64,
    /// Does not influence results.
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            restarts: 8,
            iters: 2000,
            step_a: 0.25,
            step_b: 50.0,
            tol: RATE_EQ_TOL,
            oracle_grid: None,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: &str| Err(OptimizeError::InvalidOptions(m.to_owned()));
        if self.restarts == 0 {
            return bad("restarts must be positive");
        }
        if self.iters == 0 {
            return bad("iters must be positive");
        }
        if !(self.step_a.is_finite() && self.step_a > 0.0) {
            return bad("step-a must be positive");
        }
        if !(self.step_b.is_finite() && self.step_b > 0.0) {
            return bad("step-b must be positive");
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        if matches!(self.oracle_grid, Some(g) if g < 2) {
            return bad("oracle grid needs at least 2 points per axis");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    Subgradient,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Ascent iterations summed over all starts (grid points for the oracle).
    pub iterations: u64,
    /// Number of starts that were run.
    pub restarts: usize,
    pub final_step: f64,
    pub feasibility_residual: f64,
    pub budget_unused: bool,
    /// Label of the start that produced the returned point.
    pub best_start: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub split: SplitPolicy,
    pub power: PowerPolicy,
    /// Achieved objective, bits per channel use.
    pub value: f64,
    /// `S1..S6` at the returned point.
    pub sum_rates: [f64; 6],
    /// 1-based indices of the bounds within `tol` of the minimum.
    pub active_bounds: Vec<usize>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl OptimizationResult {
    pub(crate) fn assemble(
        law: &FadingLaw,
        split: SplitPolicy,
        power: PowerPolicy,
        value: f64,
        tol: f64,
        method: Method,
        diagnostics: Diagnostics,
    ) -> Self {
        let sum_rates = rates::sum_rates_unchecked(law, &split, &power);
        let min = sum_rates.iter().copied().fold(f64::INFINITY, f64::min);
        let active_bounds = (0..6).filter(|&m| sum_rates[m] - min <= tol).map(|m| m + 1).collect();
        let diagnostics = Diagnostics {
            feasibility_residual: power.residual(law),
            ..diagnostics
        };
        OptimizationResult {
            split,
            power,
            value,
            sum_rates,
            active_bounds,
            method,
            diagnostics,
        }
    }

    pub fn bounds(&self) -> SumRateBounds {
        SumRateBounds::from_values(self.sum_rates)
    }
}

/// A starting point for the ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct Start {
    pub split: SplitPolicy,
    pub power: PowerPolicy,
    pub label: String,
}

/// Which sum-rate bounds enter the objective and which split entries are
/// frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub mask: [bool; 6],
    pub fixed: Vec<[Option<f64>; 2]>,
}

impl Problem {
    /// All six bounds, every split entry free.
    pub fn joint(law: &FadingLaw) -> Self {
        Problem {
            mask: [true; 6],
            fixed: vec![[None, None]; law.len()],
        }
    }

    /// The given bounds with the split frozen at `split`.
    pub fn fixed_split(split: &SplitPolicy, bounds: &[usize]) -> Self {
        let mut mask = [false; 6];
        for &m in bounds {
            mask[m - 1] = true;
        }
        Problem {
            mask,
            fixed: split.0.iter().map(|a| [Some(a[0]), Some(a[1])]).collect(),
        }
    }

    pub fn objective(&self, values: &[f64; 6]) -> f64 {
        masked_min(values, &self.mask)
    }

    fn apply_fixed(&self, split: &mut SplitPolicy) {
        for (a, f) in split.0.iter_mut().zip(&self.fixed) {
            for k in 0..2 {
                if let Some(v) = f[k] {
                    a[k] = v;
                }
            }
        }
    }

    fn alpha_free(&self) -> bool {
        self.fixed.iter().any(|f| f.iter().any(Option::is_none))
    }
}

pub(crate) fn masked_min(values: &[f64; 6], mask: &[bool; 6]) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &on)| on)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min)
}

/// Objective of the joint problem: `min_m S_m(alpha, P)`.
pub fn joint_objective(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> Result<f64, OptimizeError> {
    Ok(rates::sum_rate_bounds(law, split, power)?.min_value)
}

/// Per-state split suggested by the state's interference regime: common
/// messages only under strong interference, private only under weak, and
/// for mixed states the strongly interfering transmitter sends common only
/// while the other sends private only.
pub fn structured_split(state_class: StateClass) -> [f64; 2] {
    match state_class {
        StateClass::Strong => [0.0, 0.0],
        StateClass::Weak => [1.0, 1.0],
        StateClass::MixedRx1WeakRx2Strong => [0.0, 1.0],
        StateClass::MixedRx1StrongRx2Weak => [1.0, 0.0],
    }
}

pub fn waterfill_policy(law: &FadingLaw) -> Result<(PowerPolicy, bool), OptimizeError> {
    let w1 = waterfill(law, User::One, law.budget1)?;
    let w2 = waterfill(law, User::Two, law.budget2)?;
    let unused = w1.budget_unused || w2.budget_unused;
    Ok((
        PowerPolicy(w1.power.iter().zip(&w2.power).map(|(a, b)| [*a, *b]).collect()),
        unused,
    ))
}

/// Spends the whole budget evenly: `P_k(s) = budget_k` in both modes.
pub fn uniform_policy(law: &FadingLaw) -> PowerPolicy {
    PowerPolicy(vec![law.budgets(); law.len()])
}

fn random_policy(law: &FadingLaw, rng: &mut ChaCha8Rng) -> PowerPolicy {
    let n = law.len();
    let budgets = law.budgets();
    let raw: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let mut out = vec![[0.0; 2]; n];
    for k in 0..2 {
        match law.mode {
            PowerMode::PerStatePower => {
                for (o, r) in out.iter_mut().zip(&raw) {
                    o[k] = budgets[k] * r[k];
                }
            }
            PowerMode::AveragePower => {
                let mean = law.expect(|i, _| raw[i][k]);
                for (o, r) in out.iter_mut().zip(&raw) {
                    o[k] = if mean > 0.0 { budgets[k] * r[k] / mean } else { 0.0 };
                }
            }
        }
    }
    // rescaling can overshoot the budget by an ulp
    project_power(&out, law)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Waterfilling, uniform and seeded random power policies, in that order.
pub(crate) fn default_powers(
    law: &FadingLaw,
    opts: &OptimizeOptions,
) -> Result<(Vec<(PowerPolicy, String)>, bool), OptimizeError> {
    let (wf, unused) = waterfill_policy(law)?;
    let mut powers = vec![
        (wf, "waterfill".to_owned()),
        (uniform_policy(law), "uniform".to_owned()),
    ];
    for r in 0..opts.restarts {
        let mut rng = rng_for(opts.seed, r as u64);
        powers.push((random_policy(law, &mut rng), format!("random/{r}")));
    }
    Ok((powers, unused))
}

/// Structured and random starts in a fixed order.
fn default_starts(
    law: &FadingLaw,
    problem: &Problem,
    opts: &OptimizeOptions,
) -> Result<(Vec<Start>, bool), OptimizeError> {
    let n = law.len();
    let (powers, unused) = default_powers(law, opts)?;
    let (fixed_powers, random_powers) = powers.split_at(2);
    let mut splits: Vec<(SplitPolicy, &str)> = Vec::new();
    if problem.alpha_free() {
        let structured = SplitPolicy(law.states.iter().map(|s| structured_split(classify_state(s))).collect());
        for candidate in [
            (structured, "structured"),
            (SplitPolicy::constant(n, [0.0, 0.0]), "common"),
            (SplitPolicy::constant(n, [1.0, 1.0]), "private"),
            (SplitPolicy::constant(n, [0.0, 1.0]), "common_private"),
            (SplitPolicy::constant(n, [1.0, 0.0]), "private_common"),
        ] {
            if !splits.iter().any(|(s, _)| *s == candidate.0) {
                splits.push(candidate);
            }
        }
    } else {
        splits.push((SplitPolicy::constant(n, [0.0, 0.0]), "fixed"));
    }
    let mut starts = Vec::new();
    for (split, sl) in &splits {
        for (power, pl) in fixed_powers {
            let mut split = split.clone();
            problem.apply_fixed(&mut split);
            starts.push(Start {
                split,
                power: power.clone(),
                label: format!("{sl}/{pl}"),
            });
        }
    }
    for (r, (power, label)) in random_powers.iter().enumerate() {
        // split draws use a stream disjoint from the power draws
        let mut rng = rng_for(opts.seed, (1 << 32) + r as u64);
        let mut split = SplitPolicy((0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect());
        problem.apply_fixed(&mut split);
        starts.push(Start {
            split,
            power: power.clone(),
            label: label.clone(),
        });
    }
    Ok((starts, unused))
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub split: SplitPolicy,
    pub power: PowerPolicy,
    pub value: f64,
    pub iters: u64,
    pub final_step: f64,
    pub label: String,
}

/// Deterministic reduction order: larger value first, then the
/// lexicographically smaller `(alpha, P)` serialization.
pub(crate) fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.value.total_cmp(&b.value) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => lex_key(a) < lex_key(b),
    }
}

fn lex_key(c: &Candidate) -> Vec<ordered::Key> {
    c.split
        .0
        .iter()
        .flatten()
        .chain(c.power.0.iter().flatten())
        .map(|&v| ordered::Key(v))
        .collect()
}

mod ordered {
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Key(pub f64);
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.0.total_cmp(&o.0))
        }
    }
}

pub(crate) fn reduce_best(cands: Vec<Candidate>) -> Option<Candidate> {
    cands.into_iter().fold(None, |best, c| match best {
        Some(b) if !better(&c, &b) => Some(b),
        _ => Some(c),
    })
}

/// Projected supergradient ascent from one start followed by a local
/// polish; returns the best point seen.
pub(crate) fn ascend(law: &FadingLaw, problem: &Problem, start: Start, opts: &OptimizeOptions) -> Candidate {
    let mut split = start.split;
    problem.apply_fixed(&mut split);
    let power = project_power(&start.power.0, law);
    let mut best = Candidate {
        value: f64::NEG_INFINITY,
        split: split.clone(),
        power: power.clone(),
        iters: 0,
        final_step: 0.0,
        label: start.label,
    };
    run_ascent(law, problem, split, power, opts, &mut best);
    polish::polish(law, problem, &mut best);
    best
}

fn run_ascent(
    law: &FadingLaw,
    problem: &Problem,
    mut split: SplitPolicy,
    mut power: PowerPolicy,
    opts: &OptimizeOptions,
    best: &mut Candidate,
) {
    let n = law.len();
    let budgets = law.budgets();
    let alpha_free = problem.alpha_free();
    let mut dir_a = vec![[0.0; 2]; n];
    let mut dir_p = vec![[0.0; 2]; n];
    let mut step = opts.step_a;
    let mut done: u64 = 0;
    for t in 0..opts.iters {
        let jac = rates::sum_rate_jacobian(law, &split, &power);
        let f = problem.objective(&jac.values);
        done += 1;
        if f > best.value {
            best.value = f;
            best.split = split.clone();
            best.power = power.clone();
        }
        let active: Vec<usize> = (0..6)
            .filter(|&m| problem.mask[m] && jac.values[m] <= f + opts.tol)
            .collect();
        let w = 1.0 / active.len() as f64;
        let mut norm2 = 0.0;
        for s in 0..n {
            let inv_p = 1.0 / law.probs[s];
            let mut g = [0.0; 4];
            for &m in &active {
                for (gi, d) in g.iter_mut().zip(jac.grad[m][s]) {
                    *gi += w * d * inv_p;
                }
            }
            for k in 0..2 {
                dir_a[s][k] = if alpha_free && problem.fixed[s][k].is_none() {
                    g[k]
                } else {
                    0.0
                };
                dir_p[s][k] = g[2 + k] * budgets[k];
                norm2 += dir_a[s][k] * dir_a[s][k] + dir_p[s][k] * dir_p[s][k];
            }
        }
        // also stops on a NaN norm
        if norm2.is_nan() || norm2 <= 1e-30 {
            break;
        }
        step = opts.step_a / (1.0 + t as f64 / opts.step_b);
        let scale = step / norm2.sqrt();
        let mut raw = power.0.clone();
        for s in 0..n {
            for k in 0..2 {
                split.0[s][k] = (split.0[s][k] + scale * dir_a[s][k]).clamp(0.0, 1.0);
                raw[s][k] += scale * dir_p[s][k] * budgets[k];
            }
        }
        power = project_power(&raw, law);
    }
    let last = problem.objective(&rates::sum_rates_unchecked(law, &split, &power));
    if last > best.value {
        best.value = last;
        best.split = split;
        best.power = power;
    }
    best.iters = done;
    best.final_step = step;
}

pub fn checked_law(law: &FadingLaw) -> Result<(), OptimizeError> {
    validate_law(law.clone())?;
    Ok(())
}

/// Runs the ascent for `problem` from the default starts plus `extra`.
pub fn maximize_problem(
    law: &FadingLaw,
    problem: &Problem,
    opts: &OptimizeOptions,
    extra: &[Start],
) -> Result<OptimizationResult, OptimizeError> {
    opts.validate()?;
    checked_law(law)?;
    let (mut starts, budget_unused) = default_starts(law, problem, opts)?;
    if let Some(g) = opts.oracle_grid {
        let cands = oracle::candidates_for(problem, g);
        let mask: Vec<usize> = (1..=6).filter(|&m| problem.mask[m - 1]).collect();
        let seed = brute_force_oracle_restricted(law, &cands, &mask, g, DEFAULT_ORACLE_CAP, opts.exec)?;
        starts.push(Start {
            split: seed.split,
            power: seed.power,
            label: format!("oracle/{g}"),
        });
    }
    for s in extra {
        if s.split.0.len() != law.len() || s.power.0.len() != law.len() {
            return Err(RateError::PolicyLengthMismatch {
                expected: law.len(),
                got: s.split.0.len().min(s.power.0.len()),
            }
            .into());
        }
        starts.push(s.clone());
    }
    let count = starts.len();
    let cands = opts.exec.map(starts, |s| ascend(law, problem, s, opts));
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

/// Joint coding across all states: maximizes `min_m S_m` over splits and
/// powers.
pub fn maximize_joint(law: &FadingLaw, opts: &OptimizeOptions) -> Result<OptimizationResult, OptimizeError> {
    maximize_joint_with_starts(law, opts, &[])
}

pub fn maximize_joint_with_starts(
    law: &FadingLaw,
    opts: &OptimizeOptions,
    extra: &[Start],
) -> Result<OptimizationResult, OptimizeError> {
    maximize_problem(law, &Problem::joint(law), opts, extra)
}
