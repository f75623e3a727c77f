//! Exhaustive grid search over splits and power policies.
//!
//! Used to check the ascent on small instances, so it shares nothing with
//! it beyond the rate integrands. The search is exact over the grid: power
//! configurations whose per-state best-case bound cannot beat the incumbent
//! are skipped, and the split enumeration is a depth-first branch and bound
//! on the same per-state upper bounds. Only points strictly worse than the
//! incumbent are ever pruned, so ties resolve identically under any chunking.

use std::cmp::Ordering;

use crate::channel::{FadingLaw, PowerMode};
use crate::exec::Exec;
use crate::rates::{self, state_bounds, sum_rates_from_bounds, PowerPolicy, SplitPolicy};

use super::{checked_law, masked_min, Diagnostics, Method, OptimizationResult, OptimizeError, Problem};

pub const DEFAULT_ORACLE_CAP: u64 = 10_000_000;

/// Grid resolution: `alpha_points` values `{0, 1/(G-1), ..., 1}` per split
/// entry and `power_points` levels per user and state.
///
/// Power levels are `budget * j / (G - 1)` in per-state mode. In average
/// mode they are `budget * j / ((G - 1) * prob(s))` with the level indices of
/// a user summing to at most `G - 1`, which includes the policies that put
/// the whole budget into a single state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleGrid {
    pub alpha_points: usize,
    pub power_points: usize,
    pub max_evaluations: u64,
}

impl OracleGrid {
    pub fn uniform(points: usize) -> Self {
        OracleGrid {
            alpha_points: points,
            power_points: points,
            max_evaluations: DEFAULT_ORACLE_CAP,
        }
    }
}

fn axis(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

/// Split candidates for `problem`: frozen entries keep their value, free
/// entries range over the grid axis. Candidates are in ascending
/// lexicographic order.
pub(crate) fn candidates_for(problem: &Problem, alpha_points: usize) -> Vec<Vec<[f64; 2]>> {
    let grid = axis(alpha_points);
    problem
        .fixed
        .iter()
        .map(|f| {
            let a1 = f[0].map_or_else(|| grid.clone(), |v| vec![v]);
            let a2 = f[1].map_or_else(|| grid.clone(), |v| vec![v]);
            a1.iter().flat_map(|&x| a2.iter().map(move |&y| [x, y])).collect()
        })
        .collect()
}

pub fn brute_force_oracle(law: &FadingLaw, grid: &OracleGrid, exec: Exec) -> Result<OptimizationResult, OptimizeError> {
    if grid.alpha_points < 2 || grid.power_points < 2 {
        return Err(OptimizeError::InvalidOptions(
            "oracle grid needs at least 2 points per axis".into(),
        ));
    }
    let cands = candidates_for(&Problem::joint(law), grid.alpha_points);
    run(law, &cands, [true; 6], grid.power_points, grid.max_evaluations, exec)
}

/// Grid search over power with the split restricted to the given per-state
/// candidate lists, maximizing the minimum of the listed bounds (1-based).
/// Earlier candidates win ties.
pub fn brute_force_oracle_restricted(
    law: &FadingLaw,
    candidates: &[Vec<[f64; 2]>],
    bounds: &[usize],
    power_points: usize,
    cap: u64,
    exec: Exec,
) -> Result<OptimizationResult, OptimizeError> {
    if power_points < 2 {
        return Err(OptimizeError::InvalidOptions(
            "oracle grid needs at least 2 points per axis".into(),
        ));
    }
    if candidates.len() != law.len() || candidates.iter().any(Vec::is_empty) {
        return Err(OptimizeError::InvalidOptions(
            "one nonempty split list per state required".into(),
        ));
    }
    if candidates.iter().flatten().flatten().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(OptimizeError::InvalidOptions(
            "split candidates must lie in [0, 1]".into(),
        ));
    }
    let mut mask = [false; 6];
    for &m in bounds {
        if !(1..=6).contains(&m) {
            return Err(OptimizeError::InvalidOptions(format!("no sum-rate bound S{m}")));
        }
        mask[m - 1] = true;
    }
    if !mask.contains(&true) {
        return Err(OptimizeError::InvalidOptions("empty bound set".into()));
    }
    run(law, candidates, mask, power_points, cap, exec)
}

/// Level-index vectors of one user's power grid.
fn power_configs(law: &FadingLaw, levels: usize) -> Vec<Vec<usize>> {
    let n = law.len();
    let max = levels - 1;
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(d: usize, left: usize, max: usize, capped: bool, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == cur.len() {
            out.push(cur.clone());
            return;
        }
        let hi = if capped { left } else { max };
        for j in 0..=hi {
            cur[d] = j;
            rec(d + 1, left.saturating_sub(j), max, capped, cur, out);
        }
    }
    rec(0, max, max, law.mode == PowerMode::AveragePower, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    alpha: Vec<usize>,
    /// interleaved `[j1(s0), j2(s0), j1(s1), ...]`
    power: Vec<usize>,
}

impl Best {
    fn none() -> Self {
        Best {
            value: f64::NEG_INFINITY,
            alpha: Vec::new(),
            power: Vec::new(),
        }
    }

    fn beats(&self, other: &Best) -> bool {
        match self.value.total_cmp(&other.value) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => (&self.alpha, &self.power) < (&other.alpha, &other.power),
        }
    }
}

struct Tables {
    /// `tab[s][c][j1 * g2 + j2]`: weighted per-state bound contributions.
    tab: Vec<Vec<Vec<[f64; 6]>>>,
    /// Per-state elementwise maximum over split candidates.
    top: Vec<Vec<[f64; 6]>>,
    g2: usize,
}

fn add6(a: &[f64; 6], b: &[f64; 6]) -> [f64; 6] {
    std::array::from_fn(|m| a[m] + b[m])
}

fn min6(a: &[f64; 6]) -> f64 {
    a.iter().copied().fold(f64::INFINITY, f64::min)
}

struct Search<'a> {
    t: &'a Tables,
    lev: Vec<usize>,
    suffix: Vec<[f64; 6]>,
    path: Vec<usize>,
    power_key: Vec<usize>,
    best: Best,
}

impl Search<'_> {
    fn dfs(&mut self, d: usize, acc: [f64; 6]) {
        let n = self.lev.len();
        if d == n {
            let value = min6(&acc);
            let cand = Best {
                value,
                alpha: self.path.clone(),
                power: self.power_key.clone(),
            };
            if cand.beats(&self.best) {
                self.best = cand;
            }
            return;
        }
        let rows = &self.t.tab[d];
        for (c, row) in rows.iter().enumerate() {
            let next = add6(&acc, &row[self.lev[d]]);
            if d + 1 < n && min6(&add6(&next, &self.suffix[d + 1])) < self.best.value {
                continue;
            }
            self.path[d] = c;
            self.dfs(d + 1, next);
        }
    }
}

fn run(
    law: &FadingLaw,
    cands: &[Vec<[f64; 2]>],
    mask: [bool; 6],
    power_points: usize,
    cap: u64,
    exec: Exec,
) -> Result<OptimizationResult, OptimizeError> {
    checked_law(law)?;
    let n = law.len();
    let budgets = law.budgets();
    let g = [0, 1].map(|k| if budgets[k] > 0.0 { power_points } else { 1 });
    let level = |k: usize, s: usize, j: usize| -> f64 {
        if g[k] == 1 {
            return 0.0;
        }
        let frac = budgets[k] * j as f64 / (g[k] - 1) as f64;
        match law.mode {
            PowerMode::PerStatePower => frac,
            PowerMode::AveragePower => frac / law.probs[s],
        }
    };
    let configs = [power_configs(law, g[0]), power_configs(law, g[1])];
    let evaluations =
        cands.iter().map(|c| c.len() as u128).product::<u128>() * configs[0].len() as u128 * configs[1].len() as u128;
    if evaluations > cap as u128 {
        return Err(OptimizeError::GridTooLarge { evaluations, cap });
    }

    let mut tab = Vec::with_capacity(n);
    let mut top = Vec::with_capacity(n);
    for (s, state_cands) in cands.iter().enumerate() {
        let state = &law.states[s];
        let prob = law.probs[s];
        let mut rows = Vec::with_capacity(state_cands.len());
        let mut best_row = vec![[f64::NEG_INFINITY; 6]; g[0] * g[1]];
        for a in state_cands {
            let mut row = Vec::with_capacity(g[0] * g[1]);
            for j1 in 0..g[0] {
                for j2 in 0..g[1] {
                    let p = [level(0, s, j1), level(1, s, j2)];
                    let v = sum_rates_from_bounds(&state_bounds(state, *a, p));
                    let w: [f64; 6] = std::array::from_fn(|m| if mask[m] { prob * v[m] } else { f64::INFINITY });
                    let t = &mut best_row[row.len()];
                    for m in 0..6 {
                        t[m] = t[m].max(w[m]);
                    }
                    row.push(w);
                }
            }
            rows.push(row);
        }
        tab.push(rows);
        top.push(best_row);
    }
    let tables = Tables { tab, top, g2: g[1] };

    let pairs = configs[0].len() * configs[1].len();
    let chunks = pairs.clamp(1, 256);
    let per_chunk = pairs.div_ceil(chunks);
    let results = exec.map_range(chunks, |ci| {
        let mut search = Search {
            t: &tables,
            lev: vec![0; n],
            suffix: vec![[0.0; 6]; n + 1],
            path: vec![0; n],
            power_key: vec![0; 2 * n],
            best: Best::none(),
        };
        for q in ci * per_chunk..((ci + 1) * per_chunk).min(pairs) {
            let c1 = &configs[0][q / configs[1].len()];
            let c2 = &configs[1][q % configs[1].len()];
            for s in 0..n {
                search.lev[s] = c1[s] * tables.g2 + c2[s];
                search.power_key[2 * s] = c1[s];
                search.power_key[2 * s + 1] = c2[s];
            }
            for s in (0..n).rev() {
                search.suffix[s] = add6(&search.suffix[s + 1], &tables.top[s][search.lev[s]]);
            }
            if min6(&search.suffix[0]) < search.best.value {
                continue;
            }
            search.dfs(0, [0.0; 6]);
        }
        search.best
    });
    let best = results
        .into_iter()
        .fold(Best::none(), |acc, b| if b.beats(&acc) { b } else { acc });

    let split = SplitPolicy((0..n).map(|s| cands[s][best.alpha[s]]).collect());
    let power = PowerPolicy(
        (0..n)
            .map(|s| [level(0, s, best.power[2 * s]), level(1, s, best.power[2 * s + 1])])
            .collect(),
    );
    let value = masked_min(&rates::sum_rates_unchecked(law, &split, &power), &mask);
    Ok(OptimizationResult::assemble(
        law,
        split,
        power,
        value,
        super::RATE_EQ_TOL,
        Method::GridOracle,
        Diagnostics {
            iterations: evaluations as u64,
            restarts: 0,
            final_step: 0.0,
            feasibility_residual: 0.0,
            budget_unused: false,
            best_start: format!("grid/{power_points}"),
        },
    ))
}
