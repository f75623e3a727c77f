//! Finite-state ergodic fading laws for the two-user interference channel.
//!
//! A law is a probability-weighted list of fading states. Each state stores
//! the four squared gain magnitudes `g_ij = |H_ij|^2`, where `i` is the
//! receiver and `j` the transmitter. Ergodic expectations over the fading
//! process become weighted sums over the list.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest deviation of the probability sum from 1 that is silently
/// absorbed by rescaling.
pub const PROB_RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("state {state}: gain {field} = {value} is negative or not finite")]
    NegativeGain {
        state: usize,
        field: &'static str,
        value: f64,
    },
    #[error("state {state}: probability {value} is not positive")]
    NonpositiveProbability { state: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbabilitySumMismatch { sum: f64 },
    #[error("law has no fading states")]
    EmptyStateList,
    #[error("{count} probabilities for {states} states")]
    LengthMismatch { states: usize, count: usize },
    #[error("budget{user} = {value} is negative or not finite")]
    NegativeBudget { user: u8, value: f64 },
    #[error("unsupported distribution: {0}")]
    UnsupportedSpec(String),
    #[error("sample count must be positive")]
    ZeroSamples,
}

/// One sub-channel realisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingState {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
}

impl FadingState {
    pub const fn new(g11: f64, g12: f64, g21: f64, g22: f64) -> Self {
        Self { g11, g12, g21, g22 }
    }

    /// The same physical state with the user labels exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.g22, self.g21, self.g12, self.g11)
    }

    /// Direct gain of transmitter `user` (1 or 2) at its own receiver.
    pub fn direct(&self, user: User) -> f64 {
        match user {
            User::One => self.g11,
            User::Two => self.g22,
        }
    }

    pub fn gains(&self) -> [f64; 4] {
        [self.g11, self.g12, self.g21, self.g22]
    }

    pub fn class(&self) -> StateClass {
        classify_state(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum User {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl User {
    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PowerMode {
    /// Long-term average power constraint `E[P_k] <= budget_k`.
    #[default]
    #[serde(rename = "average")]
    AveragePower,
    /// Every fading state individually obeys `P_k(s) <= budget_k`.
    #[serde(rename = "per_state")]
    PerStatePower,
}

impl std::fmt::Display for PowerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PowerMode::AveragePower => "average",
            PowerMode::PerStatePower => "per_state",
        })
    }
}

impl std::str::FromStr for PowerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(PowerMode::AveragePower),
            "per_state" => Ok(PowerMode::PerStatePower),
            other => Err(format!("unknown power mode `{other}`")),
        }
    }
}

/// A finite ergodic fading law with its power budgets.
///
/// This is also the on-disk law document; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingLaw {
    pub states: Vec<FadingState>,
    pub probs: Vec<f64>,
    pub budget1: f64,
    pub budget2: f64,
    #[serde(default)]
    pub mode: PowerMode,
}

impl FadingLaw {
    /// Builds and validates a law.
    pub fn new(
        states: Vec<FadingState>,
        probs: Vec<f64>,
        budgets: [f64; 2],
        mode: PowerMode,
    ) -> Result<Self, ChannelError> {
        validate_law(FadingLaw {
            states,
            probs,
            budget1: budgets[0],
            budget2: budgets[1],
            mode,
        })
    }

    /// Equiprobable law over `states`.
    pub fn uniform(states: Vec<FadingState>, budgets: [f64; 2], mode: PowerMode) -> Result<Self, ChannelError> {
        let n = states.len();
        let probs = vec![1.0 / n.max(1) as f64; n];
        Self::new(states, probs, budgets, mode)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn budgets(&self) -> [f64; 2] {
        [self.budget1, self.budget2]
    }

    pub fn budget(&self, user: User) -> f64 {
        self.budgets()[user.index()]
    }

    /// The same channel with user labels exchanged (gains and budgets).
    pub fn swapped(&self) -> Self {
        FadingLaw {
            states: self.states.iter().map(FadingState::swapped).collect(),
            probs: self.probs.clone(),
            budget1: self.budget2,
            budget2: self.budget1,
            mode: self.mode,
        }
    }

    /// Expectation of a per-state quantity, summed in state order.
    pub fn expect<F: FnMut(usize, &FadingState) -> f64>(&self, mut f: F) -> f64 {
        self.states
            .iter()
            .zip(&self.probs)
            .enumerate()
            .fold(0.0, |acc, (i, (s, p))| acc + p * f(i, s))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("law serialization cannot fail")
    }
}

/// Checks every law invariant. A probability sum that is off by at most
/// [`PROB_RENORM_TOL`] is rescaled to sum to one; otherwise the law is
/// returned untouched.
pub fn validate_law(mut law: FadingLaw) -> Result<FadingLaw, ChannelError> {
    if law.states.is_empty() {
        return Err(ChannelError::EmptyStateList);
    }
    if law.probs.len() != law.states.len() {
        return Err(ChannelError::LengthMismatch {
            states: law.states.len(),
            count: law.probs.len(),
        });
    }
    for (i, s) in law.states.iter().enumerate() {
        for (field, value) in ["g11", "g12", "g21", "g22"].into_iter().zip(s.gains()) {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ChannelError::NegativeGain { state: i, field, value });
            }
        }
    }
    for (i, &p) in law.probs.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(ChannelError::NonpositiveProbability { state: i, value: p });
        }
    }
    for (user, value) in [(1u8, law.budget1), (2u8, law.budget2)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(ChannelError::NegativeBudget { user, value });
        }
    }
    let sum: f64 = law.probs.iter().sum();
    if (sum - 1.0).abs() > PROB_RENORM_TOL {
        return Err(ChannelError::ProbabilitySumMismatch { sum });
    }
    if sum != 1.0 {
        for p in &mut law.probs {
            *p /= sum;
        }
    }
    Ok(law)
}

/// Per-state interference regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateClass {
    Strong,
    Weak,
    /// Receiver 1 sees weak interference (`g12 < g22`), receiver 2 strong (`g21 >= g11`).
    MixedRx1WeakRx2Strong,
    /// Receiver 1 sees strong interference (`g12 >= g22`), receiver 2 weak (`g21 < g11`).
    MixedRx1StrongRx2Weak,
}

impl StateClass {
    pub fn is_mixed(self) -> bool {
        matches!(
            self,
            StateClass::MixedRx1WeakRx2Strong | StateClass::MixedRx1StrongRx2Weak
        )
    }

    pub fn swapped(self) -> Self {
        match self {
            StateClass::MixedRx1WeakRx2Strong => StateClass::MixedRx1StrongRx2Weak,
            StateClass::MixedRx1StrongRx2Weak => StateClass::MixedRx1WeakRx2Strong,
            other => other,
        }
    }
}

/// Quadrant rule. A receiver sees strong interference when the cross gain
/// into it is at least the interferer's direct gain; ties count as strong.
pub fn classify_state(s: &FadingState) -> StateClass {
    let rx1_strong = s.g12 >= s.g22;
    let rx2_strong = s.g21 >= s.g11;
    match (rx1_strong, rx2_strong) {
        (true, true) => StateClass::Strong,
        (false, false) => StateClass::Weak,
        (false, true) => StateClass::MixedRx1WeakRx2Strong,
        (true, false) => StateClass::MixedRx1StrongRx2Weak,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structural {
    UniformlyStrong,
    UniformlyWeak,
    /// Every state mixed with the given orientation.
    UniformlyMixed(StateClass),
    Hybrid,
}

impl std::fmt::Display for Structural {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Structural::UniformlyStrong => f.write_str("UniformlyStrong"),
            Structural::UniformlyWeak => f.write_str("UniformlyWeak"),
            Structural::UniformlyMixed(StateClass::MixedRx1StrongRx2Weak) => {
                f.write_str("UniformlyMixed(Rx1StrongRx2Weak)")
            }
            Structural::UniformlyMixed(_) => f.write_str("UniformlyMixed(Rx1WeakRx2Strong)"),
            Structural::Hybrid => f.write_str("Hybrid"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelClass {
    pub structural: Structural,
    /// Filled in by the EVS check; always false straight out of
    /// [`classify_channel`].
    pub evs: bool,
}

pub fn classify_channel(law: &FadingLaw) -> ChannelClass {
    let mut classes = law.states.iter().map(classify_state);
    let first = classes.next().expect("validated law has a state");
    let structural = if classes.all(|c| c == first) {
        match first {
            StateClass::Strong => Structural::UniformlyStrong,
            StateClass::Weak => Structural::UniformlyWeak,
            mixed => Structural::UniformlyMixed(mixed),
        }
    } else {
        Structural::Hybrid
    };
    ChannelClass { structural, evs: false }
}

/// Source of fading states for [`sample_law`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Independent Rayleigh fading per link: each `g_ij` is exponential
    /// with the given mean-square gain, ordered `[g11, g12, g21, g22]`.
    Rayleigh { mean_square: [f64; 4] },
    /// Independent log-normal shadowing per link with mean preserved:
    /// `g = m * exp(sigma * z - sigma^2 / 2)`, `sigma = sigma_db * ln(10) / 10`.
    LogNormal { mean_square: [f64; 4], sigma_db: f64 },
    /// States taken verbatim, equiprobable.
    Explicit { states: Vec<FadingState> },
}

/// Draws an equiprobable finite law.
///
/// Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`);
/// gains are drawn link by link in the order g11, g12, g21, g22 for each
/// state in turn. Exponential and normal variates use the `rand_distr`
/// ziggurat samplers `Exp1` and `StandardNormal`.
pub fn sample_law(
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
    budgets: [f64; 2],
    mode: PowerMode,
) -> Result<FadingLaw, ChannelError> {
    if n == 0 {
        return Err(ChannelError::ZeroSamples);
    }
    let check_means = |m: &[f64; 4]| {
        if m.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(ChannelError::UnsupportedSpec(format!(
                "mean-square gains must be finite and nonnegative, got {m:?}"
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = match spec {
        DistributionSpec::Rayleigh { mean_square } => {
            check_means(mean_square)?;
            (0..n)
                .map(|_| {
                    let mut g = [0.0; 4];
                    for (gi, m) in g.iter_mut().zip(mean_square) {
                        let e: f64 = Exp1.sample(&mut rng);
                        *gi = m * e;
                    }
                    FadingState::new(g[0], g[1], g[2], g[3])
                })
                .collect()
        }
        DistributionSpec::LogNormal { mean_square, sigma_db } => {
            check_means(mean_square)?;
            if !(sigma_db.is_finite() && *sigma_db >= 0.0) {
                return Err(ChannelError::UnsupportedSpec(format!(
                    "log-normal spread must be finite and nonnegative, got {sigma_db}"
                )));
            }
            let sigma = sigma_db * std::f64::consts::LN_10 / 10.0;
            (0..n)
                .map(|_| {
                    let mut g = [0.0; 4];
                    for (gi, m) in g.iter_mut().zip(mean_square) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *gi = m * (sigma * z - 0.5 * sigma * sigma).exp();
                    }
                    FadingState::new(g[0], g[1], g[2], g[3])
                })
                .collect()
        }
        DistributionSpec::Explicit { states } => {
            if states.is_empty() {
                return Err(ChannelError::ZeroSamples);
            }
            states.clone()
        }
    };
    FadingLaw::uniform(states, budgets, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state(s: FadingState) -> FadingLaw {
        FadingLaw::new(vec![s], vec![1.0], [1.0, 1.0], PowerMode::AveragePower).unwrap()
    }

    #[test]
    fn minimal_law_is_accepted() {
        let law = one_state(FadingState::new(1.0, 0.5, 0.5, 1.0));
        assert_eq!(law.probs, vec![1.0]);
    }

    #[test]
    fn probability_sum_mismatch() {
        let s = FadingState::new(1.0, 0.5, 0.5, 1.0);
        let err = FadingLaw::new(vec![s, s], vec![0.5, 0.4], [1.0, 1.0], PowerMode::AveragePower).unwrap_err();
        assert!(matches!(err, ChannelError::ProbabilitySumMismatch { .. }));
    }

    #[test]
    fn tiny_probability_drift_is_renormalized() {
        let s = FadingState::new(1.0, 0.5, 0.5, 1.0);
        let law = FadingLaw::new(vec![s, s], vec![0.5, 0.5 + 1e-12], [1.0, 1.0], PowerMode::AveragePower).unwrap();
        let sum: f64 = law.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let s = FadingState::new(1.0, 0.5, 0.5, 1.0);
        let bad_gain = FadingState::new(1.0, -0.1, 0.5, 1.0);
        assert!(matches!(
            FadingLaw::new(vec![bad_gain], vec![1.0], [1.0, 1.0], PowerMode::AveragePower),
            Err(ChannelError::NegativeGain { field: "g12", .. })
        ));
        assert!(matches!(
            FadingLaw::new(vec![s, s], vec![1.0, 0.0], [1.0, 1.0], PowerMode::AveragePower),
            Err(ChannelError::NonpositiveProbability { state: 1, .. })
        ));
        assert_eq!(
            FadingLaw::new(vec![], vec![], [1.0, 1.0], PowerMode::AveragePower),
            Err(ChannelError::EmptyStateList)
        );
        assert!(matches!(
            FadingLaw::new(vec![s], vec![1.0], [1.0, -2.0], PowerMode::AveragePower),
            Err(ChannelError::NegativeBudget { user: 2, .. })
        ));
        let nan = FadingState::new(f64::NAN, 0.0, 0.0, 1.0);
        assert!(FadingLaw::new(vec![nan], vec![1.0], [1.0, 1.0], PowerMode::AveragePower).is_err());
    }

    #[test]
    fn state_classification_examples() {
        assert_eq!(
            classify_state(&FadingState::new(1.0, 2.0, 3.0, 1.0)),
            StateClass::Strong
        );
        assert_eq!(classify_state(&FadingState::new(1.0, 0.5, 0.5, 1.0)), StateClass::Weak);
        assert_eq!(
            classify_state(&FadingState::new(1.0, 0.25, 4.0, 1.0)),
            StateClass::MixedRx1WeakRx2Strong
        );
        assert_eq!(
            classify_state(&FadingState::new(1.0, 4.0, 0.25, 1.0)),
            StateClass::MixedRx1StrongRx2Weak
        );
        // ties are strong
        assert_eq!(
            classify_state(&FadingState::new(1.0, 1.0, 1.0, 1.0)),
            StateClass::Strong
        );
    }

    #[test]
    fn channel_classification_examples() {
        let weak = FadingState::new(1.0, 0.5, 0.5, 1.0);
        let weak2 = FadingState::new(2.0, 0.1, 0.3, 1.0);
        let strong = FadingState::new(1.0, 2.0, 3.0, 1.0);
        let m12 = FadingState::new(1.0, 0.25, 4.0, 1.0);
        let m21 = FadingState::new(1.0, 4.0, 0.25, 1.0);
        let law = |v: Vec<FadingState>| FadingLaw::uniform(v, [1.0, 1.0], PowerMode::AveragePower).unwrap();
        assert_eq!(
            classify_channel(&law(vec![weak, weak2])).structural,
            Structural::UniformlyWeak
        );
        assert_eq!(
            classify_channel(&law(vec![strong, weak])).structural,
            Structural::Hybrid
        );
        assert_eq!(classify_channel(&law(vec![m12, m21])).structural, Structural::Hybrid);
        assert_eq!(
            classify_channel(&law(vec![m12, m12])).structural,
            Structural::UniformlyMixed(StateClass::MixedRx1WeakRx2Strong)
        );
        assert!(!classify_channel(&law(vec![strong])).evs);
    }

    #[test]
    fn explicit_passthrough() {
        let a = FadingState::new(1.0, 0.2, 0.2, 1.0);
        let b = FadingState::new(1.0, 0.3, 0.1, 1.0);
        let law = sample_law(
            &DistributionSpec::Explicit { states: vec![a, b] },
            2,
            0,
            [1.0, 1.0],
            PowerMode::AveragePower,
        )
        .unwrap();
        assert_eq!(law.states, vec![a, b]);
        assert_eq!(law.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = DistributionSpec::Rayleigh {
            mean_square: [1.0, 0.5, 0.5, 1.0],
        };
        let a = sample_law(&spec, 4, 7, [1.0, 1.0], PowerMode::AveragePower).unwrap();
        let b = sample_law(&spec, 4, 7, [1.0, 1.0], PowerMode::AveragePower).unwrap();
        assert_eq!(a, b);
        let c = sample_law(&spec, 4, 8, [1.0, 1.0], PowerMode::AveragePower).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_errors() {
        let spec = DistributionSpec::Rayleigh {
            mean_square: [1.0, 0.5, 0.5, 1.0],
        };
        assert_eq!(
            sample_law(&spec, 0, 1, [1.0, 1.0], PowerMode::AveragePower),
            Err(ChannelError::ZeroSamples)
        );
        let neg = DistributionSpec::Rayleigh {
            mean_square: [1.0, -0.5, 0.5, 1.0],
        };
        assert!(matches!(
            sample_law(&neg, 3, 1, [1.0, 1.0], PowerMode::AveragePower),
            Err(ChannelError::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn rayleigh_mean_square_is_respected() {
        let spec = DistributionSpec::Rayleigh {
            mean_square: [2.0, 0.5, 0.5, 1.0],
        };
        let law = sample_law(&spec, 100_000, 11, [1.0, 1.0], PowerMode::AveragePower).unwrap();
        let mean = law.expect(|_, s| s.g11);
        assert!((mean - 2.0).abs() < 0.02 * 2.0, "mean {mean}");
    }

    #[test]
    fn lognormal_mean_is_preserved() {
        let spec = DistributionSpec::LogNormal {
            mean_square: [1.0, 0.3, 0.3, 1.0],
            sigma_db: 4.0,
        };
        let law = sample_law(&spec, 100_000, 3, [1.0, 1.0], PowerMode::AveragePower).unwrap();
        let mean = law.expect(|_, s| s.g12);
        assert!((mean - 0.3).abs() < 0.02 * 0.3, "mean {mean}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let txt = r#"{"states":[{"g11":1,"g12":0,"g21":0,"g22":1,"g13":2}],"probs":[1],"budget1":1,"budget2":1,"mode":"average"}"#;
        assert!(serde_json::from_str::<FadingLaw>(txt).is_err());
    }
}
