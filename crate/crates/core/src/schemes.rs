//! Sub-class checks and the structured optimizations they license.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{classify_channel, classify_state, ChannelClass, FadingLaw, PowerMode, StateClass, Structural};
use crate::optimize::{
    self, joint_objective, maximize_joint, maximize_problem, maximize_separable_with_starts, structured_split,
    waterfill_policy, Diagnostics, Method, OptimizationResult, OptimizeError, OptimizeOptions, Problem, RATE_EQ_TOL,
};
use crate::rates::{self, PowerPolicy, SplitPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("the EVS condition does not hold")]
    NotEvs,
    #[error("channel is {0}, not uniformly strong")]
    NotUniformlyStrong(Structural),
    #[error("channel is {0}, not uniformly mixed")]
    NotUniformlyMixed(Structural),
    #[error("channel is {0}, not uniformly weak")]
    NotUniformlyWeak(Structural),
    #[error("the uniformly weak sufficient conditions fail")]
    UwConditionsFail,
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

/// Sum-rates at the all-common split with both users waterfilling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvsWitness {
    /// `S1 < min(S2, S3)`, strict.
    pub holds: bool,
    /// `S1 < Sj` for every `j > 1`.
    pub full_condition: bool,
    pub sum_rates: [f64; 6],
    pub power: PowerPolicy,
    pub budget_unused: bool,
}

pub fn check_evs(law: &FadingLaw) -> Result<EvsWitness, SchemeError> {
    optimize::checked_law(law)?;
    let (power, budget_unused) = waterfill_policy(law)?;
    let split = SplitPolicy::constant(law.len(), [0.0, 0.0]);
    let s = rates::sum_rates_unchecked(law, &split, &power);
    Ok(EvsWitness {
        holds: s[0] < s[1].min(s[2]),
        full_condition: s[1..].iter().all(|&v| s[0] < v),
        sum_rates: s,
        power,
        budget_unused,
    })
}

/// Structural class with the EVS flag filled in.
pub fn classify_with_evs(law: &FadingLaw) -> Result<ChannelClass, SchemeError> {
    let mut class = classify_channel(law);
    class.evs = check_evs(law)?.holds;
    Ok(class)
}

/// Sum of the two interference-free ergodic capacities, reached with all
/// power on the common messages.
pub fn evs_sum_capacity(law: &FadingLaw) -> Result<OptimizationResult, SchemeError> {
    let w = check_evs(law)?;
    if !w.holds {
        return Err(SchemeError::NotEvs);
    }
    let split = SplitPolicy::constant(law.len(), [0.0, 0.0]);
    Ok(OptimizationResult::at_point(
        law,
        split,
        w.power,
        w.sum_rates[0],
        Method::ClosedForm,
        Diagnostics {
            budget_unused: w.budget_unused,
            best_start: "waterfill".into(),
            ..Diagnostics::default()
        },
    ))
}

fn require(
    law: &FadingLaw,
    ok: impl Fn(Structural) -> bool,
    err: fn(Structural) -> SchemeError,
) -> Result<Structural, SchemeError> {
    optimize::checked_law(law)?;
    let structural = classify_channel(law).structural;
    if ok(structural) {
        Ok(structural)
    } else {
        Err(err(structural))
    }
}

/// All-common split, power maximizing `min(S1, S2, S3)`.
pub fn us_sum_capacity(law: &FadingLaw, opts: &OptimizeOptions) -> Result<OptimizationResult, SchemeError> {
    require(
        law,
        |s| s == Structural::UniformlyStrong,
        SchemeError::NotUniformlyStrong,
    )?;
    let split = SplitPolicy::constant(law.len(), [0.0, 0.0]);
    Ok(maximize_problem(
        law,
        &Problem::fixed_split(&split, &[1, 2, 3]),
        opts,
        &[],
    )?)
}

/// The transmitter whose signal is strong at the other receiver sends only
/// a common message, the other only a private one; power maximizes
/// `min(S2, S3)`.
pub fn um_sum_capacity(law: &FadingLaw, opts: &OptimizeOptions) -> Result<OptimizationResult, SchemeError> {
    let structural = require(
        law,
        |s| matches!(s, Structural::UniformlyMixed(_)),
        SchemeError::NotUniformlyMixed,
    )?;
    let Structural::UniformlyMixed(orientation) = structural else {
        unreachable!()
    };
    let split = SplitPolicy::constant(law.len(), structured_split(orientation));
    Ok(maximize_problem(
        law,
        &Problem::fixed_split(&split, &[2, 3]),
        opts,
        &[],
    )?)
}

/// Slack of the two uniformly weak conditions in every state, at the largest
/// per-state power the constraint allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UwCheck {
    pub holds: bool,
    /// Per state: `g22 - (1 + g21 P1) g12` and `g11 - (1 + g12 P2) g21`.
    pub margins: Vec<[f64; 2]>,
}

pub fn uw_condition_check(law: &FadingLaw) -> Result<UwCheck, SchemeError> {
    require(law, |s| s == Structural::UniformlyWeak, SchemeError::NotUniformlyWeak)?;
    let budgets = law.budgets();
    let margins: Vec<[f64; 2]> = law
        .states
        .iter()
        .zip(&law.probs)
        .map(|(g, &prob)| {
            let p = match law.mode {
                PowerMode::AveragePower => [budgets[0] / prob, budgets[1] / prob],
                PowerMode::PerStatePower => budgets,
            };
            [
                g.g22 - (1.0 + g.g21 * p[0]) * g.g12,
                g.g11 - (1.0 + g.g12 * p[1]) * g.g21,
            ]
        })
        .collect();
    Ok(UwCheck {
        holds: margins.iter().flatten().all(|&m| m > 0.0),
        margins,
    })
}

/// Interference treated as noise at both receivers, power maximizing `S1`.
pub fn uw_sum_rate(law: &FadingLaw, opts: &OptimizeOptions) -> Result<OptimizationResult, SchemeError> {
    if !uw_condition_check(law)?.holds {
        return Err(SchemeError::UwConditionsFail);
    }
    let split = SplitPolicy::constant(law.len(), [1.0, 1.0]);
    Ok(maximize_problem(law, &Problem::fixed_split(&split, &[1]), opts, &[])?)
}

/// Per-state split pattern: strong and mixed states take their structured
/// split, weak states are left to the optimizer.
pub fn recommended_split(law: &FadingLaw) -> Vec<[Option<f64>; 2]> {
    law.states
        .iter()
        .map(|s| match classify_state(s) {
            StateClass::Weak => [None, None],
            c => structured_split(c).map(Some),
        })
        .collect()
}

/// Joint maximization over all six bounds with the split frozen on strong
/// and mixed states.
pub fn hybrid_sum_rate(law: &FadingLaw, opts: &OptimizeOptions) -> Result<OptimizationResult, SchemeError> {
    optimize::checked_law(law)?;
    let problem = Problem {
        mask: [true; 6],
        fixed: recommended_split(law),
    };
    Ok(maximize_problem(law, &problem, opts, &[])?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EvsClosedForm,
    UniformlyStrong,
    UniformlyMixed,
    UniformlyWeak,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubclassReport {
    pub class: ChannelClass,
    pub evs_witness: EvsWitness,
    /// Present for uniformly weak channels only.
    pub uw_conditions: Option<UwCheck>,
    /// `None` entries were optimized numerically.
    pub recommended_split: Vec<[Option<f64>; 2]>,
    pub scheme: Scheme,
    pub sum_rate: OptimizationResult,
    /// Whether the value is known to be the sum-capacity.
    pub capacity_certified: bool,
}

pub fn subclass_report(law: &FadingLaw, opts: &OptimizeOptions) -> Result<SubclassReport, SchemeError> {
    let evs_witness = check_evs(law)?;
    let mut class = classify_channel(law);
    class.evs = evs_witness.holds;
    let n = law.len();
    let mut uw_conditions = None;
    let (scheme, sum_rate, split, certified) = if class.evs {
        let r = evs_sum_capacity(law)?;
        (Scheme::EvsClosedForm, r, vec![[Some(0.0); 2]; n], true)
    } else {
        match class.structural {
            Structural::UniformlyStrong => (
                Scheme::UniformlyStrong,
                us_sum_capacity(law, opts)?,
                vec![[Some(0.0); 2]; n],
                true,
            ),
            Structural::UniformlyMixed(o) => (
                Scheme::UniformlyMixed,
                um_sum_capacity(law, opts)?,
                vec![structured_split(o).map(Some); n],
                true,
            ),
            Structural::UniformlyWeak => {
                let check = uw_condition_check(law)?;
                let holds = check.holds;
                uw_conditions = Some(check);
                if holds {
                    (
                        Scheme::UniformlyWeak,
                        uw_sum_rate(law, opts)?,
                        vec![[Some(1.0); 2]; n],
                        false,
                    )
                } else {
                    (
                        Scheme::Structured,
                        hybrid_sum_rate(law, opts)?,
                        recommended_split(law),
                        false,
                    )
                }
            }
            Structural::Hybrid => (
                Scheme::Structured,
                hybrid_sum_rate(law, opts)?,
                recommended_split(law),
                false,
            ),
        }
    };
    Ok(SubclassReport {
        class,
        evs_witness,
        uw_conditions,
        recommended_split: split,
        scheme,
        sum_rate,
        capacity_certified: certified,
    })
}

/// Split found by the joint optimizer in one state, next to the pattern the
/// state's class suggests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSplit {
    pub class: StateClass,
    pub split: [f64; 2],
    /// Strong: `(0, 0)`; mixed: the oriented split; weak: both entries
    /// positive. Checked to within `1e-3`.
    pub structured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub class: ChannelClass,
    pub joint: OptimizationResult,
    pub separable: OptimizationResult,
    /// `joint.value - separable.value`.
    pub gap: f64,
    pub joint_structure: Vec<StateSplit>,
}

const STRUCTURE_TOL: f64 = 1e-3;

/// Runs both optimizers with the same options and lets each try the other's
/// optimum, so the reported values are never ordered by accident of the
/// local search: the joint objective at the separable optimum is at least
/// the separable value.
pub fn compare_joint_vs_separable(law: &FadingLaw, opts: &OptimizeOptions) -> Result<Comparison, SchemeError> {
    let mut joint = maximize_joint(law, opts)?;
    let mut separable = maximize_separable_with_starts(law, opts, std::slice::from_ref(&joint.power))?;

    let exchanged = joint_objective(law, &separable.split, &separable.power)?;
    if exchanged > joint.value {
        let diagnostics = Diagnostics {
            best_start: "separable".into(),
            ..joint.diagnostics.clone()
        };
        joint = OptimizationResult::at_point(
            law,
            separable.split.clone(),
            separable.power.clone(),
            exchanged,
            Method::Subgradient,
            diagnostics,
        );
    }
    let per_state = law.expect(|i, g| {
        rates::state_sum_rates(g, joint.split.0[i], joint.power.0[i])
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    });
    if per_state > separable.value {
        let diagnostics = Diagnostics {
            best_start: "joint".into(),
            ..separable.diagnostics.clone()
        };
        separable = OptimizationResult::at_point(
            law,
            joint.split.clone(),
            joint.power.clone(),
            per_state,
            Method::Subgradient,
            diagnostics,
        );
    }

    let mut class = classify_channel(law);
    class.evs = check_evs(law)?.holds;
    let joint_structure = law
        .states
        .iter()
        .zip(&joint.split.0)
        .map(|(g, &a)| {
            let c = classify_state(g);
            let structured = match c {
                StateClass::Weak => a[0] > 0.0 && a[1] > 0.0,
                _ => {
                    let target = structured_split(c);
                    (0..2).all(|k| (a[k] - target[k]).abs() <= STRUCTURE_TOL)
                }
            };
            StateSplit {
                class: c,
                split: a,
                structured,
            }
        })
        .collect();
    Ok(Comparison {
        class,
        gap: joint.value - separable.value,
        joint,
        separable,
        joint_structure,
    })
}

impl OptimizationResult {
    fn at_point(
        law: &FadingLaw,
        split: SplitPolicy,
        power: PowerPolicy,
        value: f64,
        method: Method,
        diagnostics: Diagnostics,
    ) -> Self {
        OptimizationResult::assemble(law, split, power, value, RATE_EQ_TOL, method, diagnostics)
    }
}
