//! Exact counterfactual regrets over a complete utility table, plus regret
//! matching. Each opponent sequence is one CFR iteration played against the
//! uniform ego strategy; regrets accumulate across iterations without
//! strategy updates, so the sum form and the closed form T·(v(I,a) − v(I))
//! must agree and are both computed and cross-checked.

use super::{seq_to_index, UtilityTable};
use crate::{Error, Result};

/// Largest tolerated fraction of invalid cells before regrets are considered
/// meaningless.
pub const INVALID_CELL_LIMIT: f64 = 0.1;

/// Accumulated counterfactual regrets for every ego decision node, indexed by
/// depth and action-prefix. A decision node at depth `d` is the ego's action
/// prefix of length `d`; the opponent's moves are averaged out, so all
/// observable opponent histories at a node share its regrets.
#[derive(Debug, Clone)]
pub struct CfrRegrets {
    pub n_actions: usize,
    pub max_moves: usize,
    /// `per_depth[d][prefix * n_actions + action]`
    per_depth: Vec<Vec<f64>>,
}

impl CfrRegrets {
    /// All action regrets at one node.
    pub fn node(&self, depth: usize, prefix_index: usize) -> &[f64] {
        let n = self.n_actions;
        &self.per_depth[depth][prefix_index * n..(prefix_index + 1) * n]
    }

    pub fn n_nodes(&self, depth: usize) -> usize {
        self.per_depth[depth].len() / self.n_actions
    }

    /// Regret for taking `action_id` after the given action-id prefix.
    pub fn regret(&self, prefix_ids: &[usize], action_id: usize) -> f64 {
        let p = seq_to_index(prefix_ids, self.n_actions);
        self.per_depth[prefix_ids.len()][p * self.n_actions + action_id]
    }
}

/// Compute the accumulated counterfactual regret R(I,a) for every ego
/// decision node and action by enumerating every opponent sequence as one
/// iteration. Counterfactual values average terminal utilities over all valid
/// ego continuations below (I,a) under the uniform strategy; iterations where
/// some action at a node has no valid continuation are skipped at that node.
pub fn exact_cfr(table: &UtilityTable) -> Result<CfrRegrets> {
    let n = table.n_actions;
    let m = table.max_moves;
    if n == 0 || m == 0 || table.n_opp_seq == 0 {
        return Err(Error::invalid("empty utility table"));
    }
    let frac = table.invalid_fraction();
    if frac >= INVALID_CELL_LIMIT {
        return Err(Error::invalid(format!(
            "utility table has {:.1}% invalid cells (limit {:.0}%)",
            frac * 100.0,
            INVALID_CELL_LIMIT * 100.0
        )));
    }
    let mut per_depth = Vec::with_capacity(m);
    for depth in 0..m {
        let n_prefix = n.pow(depth as u32);
        let stride = n.pow((m - depth - 1) as u32);
        let mut regrets = vec![0.0; n_prefix * n];
        let mut v_t = vec![0.0; n];
        for prefix in 0..n_prefix {
            let mut regret_sum = vec![0.0; n];
            let mut value_sum = vec![0.0; n];
            let mut iterations = 0usize;
            for t in 0..table.n_opp_seq {
                let mut ok = true;
                for (a, v) in v_t.iter_mut().enumerate() {
                    let base = (prefix * n + a) * stride;
                    let mut acc = 0.0;
                    let mut count = 0usize;
                    for e in base..base + stride {
                        if let Some(u) = table.utility(e, t) {
                            acc += u;
                            count += 1;
                        }
                    }
                    if count == 0 {
                        ok = false;
                        break;
                    }
                    *v = acc / count as f64;
                }
                if !ok {
                    continue;
                }
                let v_bar = v_t.iter().sum::<f64>() / n as f64;
                for a in 0..n {
                    regret_sum[a] += v_t[a] - v_bar;
                    value_sum[a] += v_t[a];
                }
                iterations += 1;
            }
            if iterations > 0 {
                // Cross-check the closed form T·(v(I,a) − v(I)) against the
                // per-iteration sum; they are algebraically identical here.
                let t = iterations as f64;
                let v_ia: Vec<f64> = value_sum.iter().map(|s| s / t).collect();
                let v_i = v_ia.iter().sum::<f64>() / n as f64;
                let mut node_sum = 0.0;
                for a in 0..n {
                    let closed = t * (v_ia[a] - v_i);
                    assert!(
                        (regret_sum[a] - closed).abs() <= 1e-9 * (1.0 + closed.abs()),
                        "regret forms diverged at depth {depth} prefix {prefix}: {} vs {}",
                        regret_sum[a],
                        closed
                    );
                    node_sum += regret_sum[a];
                }
                debug_assert!(node_sum.abs() <= 1e-9 * (1.0 + t), "per-node regrets must sum to zero, got {node_sum}");
            }
            regrets[prefix * n..(prefix + 1) * n].copy_from_slice(&regret_sum);
        }
        per_depth.push(regrets);
    }
    Ok(CfrRegrets { n_actions: n, max_moves: m, per_depth })
}

/// Regret matching: probabilities proportional to positive regret parts; if
/// no regret is positive, all probability goes on the highest regret (exact
/// ties resolve to the lowest action id).
pub fn regret_match(regrets: &[f64]) -> Result<Vec<f64>> {
    let positive: Vec<f64> = regrets.iter().map(|&r| r.max(0.0)).collect();
    let total: f64 = positive.iter().sum();
    if total > 0.0 {
        Ok(positive.iter().map(|p| p / total).collect())
    } else {
        let mut dist = vec![0.0; regrets.len()];
        dist[best_action(regrets)?] = 1.0;
        Ok(dist)
    }
}

/// The action a pure player takes: argmax regret, ties to the lowest id.
pub fn best_action(regrets: &[f64]) -> Result<usize> {
    if regrets.is_empty() {
        return Err(Error::invalid("regret matching needs at least one action"));
    }
    if regrets.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("non-finite regret"));
    }
    let mut best = 0;
    for (i, &r) in regrets.iter().enumerate().skip(1) {
        if r > regrets[best] {
            best = i;
        }
    }
    Ok(best)
}
