use crate::channel::{FadingLaw, PowerMode};
use crate::rates::PowerPolicy;

/// Projection of arbitrary per-state powers onto the law's feasible set.
///
/// Average mode projects each user separately in the probability-weighted
/// norm onto `{P >= 0, E[P] <= budget}`; the solution is a uniform
/// downward shift `max(0, raw - shift)`. Per-state mode clamps each entry
/// to `[0, budget]`.
pub fn project_power(raw: &[[f64; 2]], law: &FadingLaw) -> PowerPolicy {
    let budgets = law.budgets();
    let mut out = vec![[0.0; 2]; raw.len()];
    for k in 0..2 {
        let column: Vec<f64> = raw.iter().map(|p| p[k]).collect();
        let projected = match law.mode {
            PowerMode::PerStatePower => column.iter().map(|&r| r.clamp(0.0, budgets[k])).collect(),
            PowerMode::AveragePower => project_weighted(&column, &law.probs, budgets[k]),
        };
        for (o, v) in out.iter_mut().zip(projected) {
            o[k] = v;
        }
    }
    PowerPolicy(out)
}

fn project_weighted(raw: &[f64], probs: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = raw.iter().map(|&r| r.max(0.0)).collect();
    let used: f64 = clipped.iter().zip(probs).map(|(r, p)| r * p).sum();
    if used <= budget + 1e-12 * budget.max(1.0) {
        return clipped;
    }
    let mut order: Vec<usize> = (0..raw.len()).filter(|&i| raw[i] > 0.0).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut weighted = 0.0;
    let mut shift = 0.0;
    for (k, &i) in order.iter().enumerate() {
        mass += probs[i];
        weighted += probs[i] * raw[i];
        shift = (weighted - budget) / mass;
        match order.get(k + 1) {
            Some(&j) if raw[j] > shift => continue,
            _ => break,
        }
    }
    raw.iter().map(|&r| (r - shift).max(0.0)).collect()
}
