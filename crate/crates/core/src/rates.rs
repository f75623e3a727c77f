//! Han-Kobayashi rate bounds for Gaussian superposition coding without
//! time-sharing.
//!
//! Every bound is an expectation over the fading law of a per-state
//! integrand. The integrands are written once, generically over [`Scalar`],
//! so the same code produces values (`f64`) and exact first derivatives
//! ([`Dual`]) with respect to the state's `(alpha1, alpha2, P1, P2)`.

use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{FadingLaw, FadingState, PowerMode};

/// Slack allowed on power constraints.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Two sum-rate bounds closer than this are reported as jointly minimal.
pub const ARGMIN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("capacity argument {0} is negative")]
    NegativeArgument(f64),
    #[error("policy has {got} entries, law has {expected} states")]
    PolicyLengthMismatch { expected: usize, got: usize },
    #[error("power policy violates the {mode} constraint of user {user} (excess {excess:e})")]
    InfeasiblePower { user: u8, mode: PowerMode, excess: f64 },
    #[error("state {state}: split fraction {value} outside [0, 1]")]
    InvalidSplit { state: usize, value: f64 },
    #[error("state {state}: power {value} negative or not finite")]
    InvalidPower { state: usize, value: f64 },
}

/// `log2(1 + x)`, bits per channel use.
pub fn cap(x: f64) -> Result<f64, RateError> {
    if x < 0.0 || x.is_nan() {
        return Err(RateError::NegativeArgument(x));
    }
    Ok(c(x))
}

#[inline]
pub(crate) fn c(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Per-state transmit powers `[P1(s), P2(s)]`, aligned with a law's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerPolicy(pub Vec<[f64; 2]>);

/// Per-state private-message power fractions `[alpha1(s), alpha2(s)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitPolicy(pub Vec<[f64; 2]>);

impl PowerPolicy {
    pub fn zeros(n: usize) -> Self {
        PowerPolicy(vec![[0.0; 2]; n])
    }

    pub fn swapped(&self) -> Self {
        PowerPolicy(self.0.iter().map(|p| [p[1], p[0]]).collect())
    }

    /// `E[P_k]` under the law's probabilities.
    pub fn average(&self, law: &FadingLaw, user: usize) -> f64 {
        law.expect(|i, _| self.0[i][user])
    }

    /// Largest violation of the law's power constraint (0 when feasible).
    pub fn residual(&self, law: &FadingLaw) -> f64 {
        let budgets = law.budgets();
        (0..2)
            .map(|k| match law.mode {
                PowerMode::AveragePower => (self.average(law, k) - budgets[k]).max(0.0),
                PowerMode::PerStatePower => self.0.iter().map(|p| (p[k] - budgets[k]).max(0.0)).fold(0.0, f64::max),
            })
            .fold(0.0, f64::max)
    }
}

impl SplitPolicy {
    pub fn constant(n: usize, alpha: [f64; 2]) -> Self {
        SplitPolicy(vec![alpha; n])
    }

    pub fn swapped(&self) -> Self {
        SplitPolicy(self.0.iter().map(|a| [a[1], a[0]]).collect())
    }
}

/// Expected values of the seven bounds `B1..B7`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBoundSet(pub [f64; 7]);

impl RateBoundSet {
    /// 1-based accessor matching the conventional bound numbering.
    pub fn b(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    pub fn sum_rates(&self) -> [f64; 6] {
        sum_rates_from_bounds(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRateBounds {
    pub values: [f64; 6],
    pub min_value: f64,
    /// 1-based indices of the bounds within [`ARGMIN_TOL`] of the minimum.
    pub argmin: Vec<usize>,
}

impl SumRateBounds {
    pub fn from_values(values: [f64; 6]) -> Self {
        let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
        let argmin = (0..6)
            .filter(|&m| values[m] - min_value <= ARGMIN_TOL)
            .map(|m| m + 1)
            .collect();
        SumRateBounds {
            values,
            min_value,
            argmin,
        }
    }

    /// 1-based accessor.
    pub fn s(&self, m: usize) -> f64 {
        self.values[m - 1]
    }
}

/// Arithmetic needed by the bound integrands.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn cst(v: f64) -> Self;
    /// `log2(1 + self)`.
    fn cap(self) -> Self;
    fn value(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn cap(self) -> Self {
        c(self)
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
}

/// Forward-mode dual number carrying derivatives with respect to
/// `(alpha1, alpha2, P1, P2)` of a single state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; 4],
}

impl Dual {
    pub fn var(v: f64, slot: usize) -> Self {
        let mut d = [0.0; 4];
        d[slot] = 1.0;
        Dual { v, d }
    }

    fn map_d(self, f: impl Fn(f64) -> f64) -> [f64; 4] {
        self.d.map(f)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a += b;
        }
        Dual { v: self.v + o.v, d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a -= b;
        }
        Dual { v: self.v - o.v, d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: Dual) -> Dual {
        let d = std::array::from_fn(|i| self.d[i] * o.v + self.v * o.d[i]);
        Dual { v: self.v * o.v, d }
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let d = std::array::from_fn(|i| (self.d[i] - q * o.d[i]) * inv);
        Dual { v: q, d }
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual { v, d: [0.0; 4] }
    }
    fn cap(self) -> Self {
        let k = 1.0 / ((1.0 + self.v) * std::f64::consts::LN_2);
        Dual {
            v: c(self.v),
            d: self.map_d(|x| x * k),
        }
    }
    fn value(self) -> f64 {
        self.v
    }
}

/// The seven bound integrands for one state.
///
/// `a` and `p` are `[user1, user2]`. Every term has the shape
/// `C(signal / (1 + residual interference))`; the denominators are always
/// at least one.
pub fn state_bounds<T: Scalar>(g: &FadingState, a: [T; 2], p: [T; 2]) -> [T; 7] {
    let one = T::cst(1.0);
    let [a1, a2] = a;
    let [p1, p2] = p;
    let (g11, g12, g21, g22) = (T::cst(g.g11), T::cst(g.g12), T::cst(g.g21), T::cst(g.g22));
    let abar1 = one - a1;
    let abar2 = one - a2;

    // residual (undecoded private) interference at each receiver
    let d1 = one + a2 * g12 * p2;
    let d2 = one + a1 * g21 * p1;

    let b1 = (g11 * p1 / d1).cap();
    let b2 = (g22 * p2 / d2).cap();

    // receiver 1 decodes all of user 1 plus user 2's common part
    let full1 = ((g11 * p1 + g12 * abar2 * p2) / d1).cap();
    let full2 = ((g22 * p2 + g21 * abar1 * p1) / d2).cap();
    // own private part alone
    let priv1 = (g11 * a1 * p1 / d1).cap();
    let priv2 = (g22 * a2 * p2 / d2).cap();
    // own private part plus the other user's common part
    let mix1 = ((a1 * g11 * p1 + g12 * abar2 * p2) / d1).cap();
    let mix2 = ((a2 * g22 * p2 + g21 * abar1 * p1) / d2).cap();

    let b3 = full1 + priv2;
    let b4 = full2 + priv1;
    let b5 = mix1 + mix2;
    let b6 = full1 + priv1 + mix2;
    let b7 = full2 + priv2 + mix1;
    [b1, b2, b3, b4, b5, b6, b7]
}

/// `S1 = B1 + B2`, `S2..S4 = B3..B5`, `S5 = (B6 + B2)/2`, `S6 = (B7 + B1)/2`.
pub fn sum_rates_from_bounds<T: Scalar>(b: &[T; 7]) -> [T; 6] {
    let half = T::cst(0.5);
    [
        b[0] + b[1],
        b[2],
        b[3],
        b[4],
        (b[5] + b[1]) * half,
        (b[6] + b[0]) * half,
    ]
}

/// Six single-state sum-rate expressions.
pub fn state_sum_rates(g: &FadingState, a: [f64; 2], p: [f64; 2]) -> [f64; 6] {
    sum_rates_from_bounds(&state_bounds(g, a, p))
}

/// Single-state HK sum-rate: the minimum of the six expressions with the
/// expectation dropped.
pub fn per_state_sum_rate(g: &FadingState, a: [f64; 2], p: [f64; 2]) -> Result<f64, RateError> {
    for &v in &a {
        if !(0.0..=1.0).contains(&v) {
            return Err(RateError::InvalidSplit { state: 0, value: v });
        }
    }
    for &v in &p {
        if !(v.is_finite() && v >= 0.0) {
            return Err(RateError::InvalidPower { state: 0, value: v });
        }
    }
    Ok(state_sum_rates(g, a, p).into_iter().fold(f64::INFINITY, f64::min))
}

pub(crate) fn check_policies(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> Result<(), RateError> {
    let n = law.len();
    for got in [split.0.len(), power.0.len()] {
        if got != n {
            return Err(RateError::PolicyLengthMismatch { expected: n, got });
        }
    }
    for (state, a) in split.0.iter().enumerate() {
        for &value in a {
            if !(0.0..=1.0).contains(&value) {
                return Err(RateError::InvalidSplit { state, value });
            }
        }
    }
    for (state, p) in power.0.iter().enumerate() {
        for &value in p {
            if !(value.is_finite() && value >= 0.0) {
                return Err(RateError::InvalidPower { state, value });
            }
        }
    }
    let budgets = law.budgets();
    for k in 0..2 {
        let excess = match law.mode {
            PowerMode::AveragePower => power.average(law, k) - budgets[k],
            PowerMode::PerStatePower => power
                .0
                .iter()
                .map(|p| p[k] - budgets[k])
                .fold(f64::NEG_INFINITY, f64::max),
        };
        if excess > FEASIBILITY_TOL {
            return Err(RateError::InfeasiblePower {
                user: k as u8 + 1,
                mode: law.mode,
                excess,
            });
        }
    }
    Ok(())
}

/// Unchecked evaluation; states are accumulated in list order.
pub(crate) fn bounds_unchecked(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> [f64; 7] {
    let mut acc = [0.0; 7];
    for ((g, prob), (a, p)) in law.states.iter().zip(&law.probs).zip(split.0.iter().zip(&power.0)) {
        let b = state_bounds(g, *a, *p);
        for (x, y) in acc.iter_mut().zip(b) {
            *x += prob * y;
        }
    }
    acc
}

pub fn rate_bounds(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> Result<RateBoundSet, RateError> {
    check_policies(law, split, power)?;
    Ok(RateBoundSet(bounds_unchecked(law, split, power)))
}

pub fn sum_rate_bounds(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> Result<SumRateBounds, RateError> {
    let b = rate_bounds(law, split, power)?;
    Ok(SumRateBounds::from_values(b.sum_rates()))
}

pub(crate) fn sum_rates_unchecked(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> [f64; 6] {
    sum_rates_from_bounds(&bounds_unchecked(law, split, power))
}

/// Values of `S1..S6` together with their exact derivatives.
///
/// `grad[m][s]` holds `dS_m / d(alpha1(s), alpha2(s), P1(s), P2(s))`,
/// including the state's probability weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SumRateJacobian {
    pub values: [f64; 6],
    pub grad: [Vec<[f64; 4]>; 6],
}

pub fn sum_rate_jacobian(law: &FadingLaw, split: &SplitPolicy, power: &PowerPolicy) -> SumRateJacobian {
    let n = law.len();
    let mut grad: [Vec<[f64; 4]>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
    for ((g, prob), (a, p)) in law.states.iter().zip(&law.probs).zip(split.0.iter().zip(&power.0)) {
        let vars = [
            Dual::var(a[0], 0),
            Dual::var(a[1], 1),
            Dual::var(p[0], 2),
            Dual::var(p[1], 3),
        ];
        let s = sum_rates_from_bounds(&state_bounds(g, [vars[0], vars[1]], [vars[2], vars[3]]));
        for m in 0..6 {
            grad[m].push(s[m].d.map(|x| prob * x));
        }
    }
    // values accumulated exactly as in `sum_rate_bounds`, bit for bit
    SumRateJacobian {
        values: sum_rates_unchecked(law, split, power),
        grad,
    }
}
