use serde::{Deserialize, Serialize};

use crate::channel::{FadingLaw, PowerMode, User};

use super::OptimizeError;

/// Single-user power allocation over the fading states of one direct link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillResult {
    pub user: User,
    pub power: Vec<f64>,
    /// `P(s) = max(0, level - 1/g(s))`. `None` in per-state mode, and when
    /// no state has a positive gain.
    pub water_level: Option<f64>,
    /// A positive budget that could not be spent because every direct gain
    /// is zero.
    pub budget_unused: bool,
}

impl WaterfillResult {
    /// Ergodic capacity of the interference-free link under this policy.
    pub fn capacity(&self, law: &FadingLaw) -> f64 {
        law.expect(|i, s| crate::rates::c(s.direct(self.user) * self.power[i]))
    }
}

/// Capacity-maximizing power for the interference-free link of `user`.
///
/// Average mode solves for the water level exactly: states are sorted by
/// `1/g` and the active set is grown until the level drops below the next
/// inverse gain. Per-state mode gives full power to every state with a
/// positive gain.
pub fn waterfill(law: &FadingLaw, user: User, budget: f64) -> Result<WaterfillResult, OptimizeError> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(OptimizeError::InvalidBudget(budget));
    }
    let gains: Vec<f64> = law.states.iter().map(|s| s.direct(user)).collect();
    let n = gains.len();
    let mut power = vec![0.0; n];
    let any_gain = gains.iter().any(|&g| g > 0.0);
    if !any_gain {
        return Ok(WaterfillResult {
            user,
            power,
            water_level: None,
            budget_unused: budget > 0.0,
        });
    }
    match law.mode {
        PowerMode::PerStatePower => {
            for (p, &g) in power.iter_mut().zip(&gains) {
                if g > 0.0 {
                    *p = budget;
                }
            }
            Ok(WaterfillResult {
                user,
                power,
                water_level: None,
                budget_unused: false,
            })
        }
        PowerMode::AveragePower => {
            let mut order: Vec<usize> = (0..n).filter(|&i| gains[i] > 0.0).collect();
            order.sort_by(|&a, &b| (1.0 / gains[a]).total_cmp(&(1.0 / gains[b])).then(a.cmp(&b)));
            let mut mass = 0.0;
            let mut weighted_inv = 0.0;
            let mut level = 0.0;
            for (k, &i) in order.iter().enumerate() {
                mass += law.probs[i];
                weighted_inv += law.probs[i] / gains[i];
                level = (budget + weighted_inv) / mass;
                let next_inv = order.get(k + 1).map(|&j| 1.0 / gains[j]);
                match next_inv {
                    Some(v) if level > v => continue,
                    _ => break,
                }
            }
            for &i in &order {
                power[i] = (level - 1.0 / gains[i]).max(0.0);
            }
            Ok(WaterfillResult {
                user,
                power,
                water_level: Some(level),
                budget_unused: false,
            })
        }
    }
}
