//! Choosing which base rows seed the next batch of synthetic instances.

use rand::Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::generation::{k_nearest, DistanceMetric};
use crate::models::Classifier;
use crate::parallel;
use crate::relaxation::BasePopulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceCategory {
    Safe,
    Borderline,
    Noisy,
}

/// Borderline rows weigh 3, everything else 1.
pub const BORDERLINE_WEIGHT: f64 = 3.0;
pub const DEFAULT_WEIGHT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceWeights {
    pub weights: Vec<f64>,
    pub categories: Vec<InstanceCategory>,
}

impl InstanceWeights {
    pub fn uniform(n: usize) -> Self {
        InstanceWeights {
            weights: vec![DEFAULT_WEIGHT; n],
            categories: vec![InstanceCategory::Safe; n],
        }
    }
}

/// Category from `q`, the number of the `k_w` nearest neighbours whose
/// predicted label differs from the row's own.
pub fn categorize(q: usize, k_w: usize) -> InstanceCategory {
    if q >= k_w {
        InstanceCategory::Noisy
    } else if 2 * q >= k_w {
        InstanceCategory::Borderline
    } else {
        InstanceCategory::Safe
    }
}

/// Labels each row safe, borderline or noisy from the model's predictions
/// on it and on its `k_w` nearest neighbours.
pub fn compute_weights<C: Classifier + ?Sized>(d: &Dataset, model: &C, k_w: usize) -> InstanceWeights {
    if k_w == 0 || d.len() < k_w + 1 {
        return InstanceWeights::uniform(d.len());
    }
    let predicted = parallel::map_range(d.len(), |i| model.predict_values(&d.row(i).values));
    let metric = DistanceMetric::from_dataset(d);
    let categories = parallel::map_range(d.len(), |i| {
        let q = k_nearest(d, &metric, i, 0..d.len(), k_w)
            .into_iter()
            .filter(|&j| predicted[j] != predicted[i])
            .count();
        categorize(q, k_w)
    });
    let weights = categories
        .iter()
        .map(|c| match c {
            InstanceCategory::Borderline => BORDERLINE_WEIGHT,
            _ => DEFAULT_WEIGHT,
        })
        .collect();
    InstanceWeights {
        weights,
        categories,
    }
}

/// Rows chosen from one base population.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RuleSelection {
    /// Position of the base population in the list passed to the selector.
    pub bp: usize,
    pub rule_id: String,
    /// Ascending row indices; may repeat under random selection.
    pub indices: Vec<usize>,
    pub lower: usize,
    pub upper: usize,
    /// Set when the bounds had to be moved to make the selection feasible.
    pub repaired: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SelectionPlan {
    pub rules: Vec<RuleSelection>,
}

impl SelectionPlan {
    /// `(bp, row)` pairs in rule order, then row order.
    pub fn flatten(&self) -> Vec<(usize, usize)> {
        self.rules
            .iter()
            .flat_map(|r| r.indices.iter().map(move |&i| (r.bp, i)))
            .collect()
    }

    pub fn total(&self) -> usize {
        self.rules.iter().map(|r| r.indices.len()).sum()
    }

    pub fn any_repaired(&self) -> bool {
        self.rules.iter().any(|r| r.repaired)
    }
}

/// Per-population quotas: `eta` split evenly over the non-empty
/// populations, the remainder going to the earliest ones.
fn quotas(bps: &[BasePopulation], eta: usize) -> Vec<usize> {
    let live: Vec<usize> = (0..bps.len()).filter(|&b| !bps[b].is_empty()).collect();
    let mut out = vec![0; bps.len()];
    if live.is_empty() {
        return out;
    }
    let (each, extra) = (eta / live.len(), eta % live.len());
    for (n, &b) in live.iter().enumerate() {
        out[b] = each + usize::from(n < extra);
    }
    out
}

/// Draws `eta` rows uniformly with replacement, spread evenly over the
/// non-empty base populations.
pub fn select_random<R: Rng + ?Sized>(bps: &[BasePopulation], eta: usize, rng: &mut R) -> SelectionPlan {
    let quota = quotas(bps, eta);
    let mut rules = Vec::new();
    for (b, bp) in bps.iter().enumerate() {
        if quota[b] == 0 {
            continue;
        }
        let mut indices: Vec<usize> = (0..quota[b])
            .map(|_| bp.member_indices[rng.gen_range(0..bp.len())])
            .collect();
        indices.sort_unstable();
        rules.push(RuleSelection {
            bp: b,
            rule_id: bp.rule_id.clone(),
            indices,
            lower: quota[b],
            upper: quota[b],
            repaired: false,
        });
    }
    SelectionPlan { rules }
}

/// Bounds on the number of rows taken from a population of `size` rows,
/// after repair: at least `min(k + 1, size)`, at most `max(quota, lower)`
/// capped at `size`.
pub fn ip_bounds(size: usize, quota: usize, k: usize) -> (usize, usize, bool) {
    let lower = (k + 1).min(size);
    let mut repaired = lower < k + 1;
    let mut upper = quota;
    if upper < lower {
        upper = lower;
        repaired = true;
    }
    (lower, upper.min(size), repaired)
}

/// Maximises the total weight of selected rows subject to per-rule count
/// bounds `[k + 1, floor(eta / m)]`.
///
/// Rule coverages are disjoint, so the program separates by rule and each
/// block is solved exactly by taking the `upper` heaviest members (ties by
/// row index). Infeasible bounds are repaired as in [`ip_bounds`].
pub fn select_ip(bps: &[BasePopulation], weights: &InstanceWeights, eta: usize, k: usize) -> SelectionPlan {
    let live = bps.iter().filter(|b| !b.is_empty()).count().max(1);
    let quota = eta / live;
    let rules = bps
        .iter()
        .enumerate()
        .filter(|(_, bp)| !bp.is_empty())
        .map(|(b, bp)| {
            let (lower, upper, repaired) = ip_bounds(bp.len(), quota, k);
            let mut ranked = bp.member_indices.clone();
            ranked.sort_by(|&x, &y| weights.weights[y].total_cmp(&weights.weights[x]).then(x.cmp(&y)));
            ranked.truncate(upper);
            ranked.sort_unstable();
            RuleSelection {
                bp: b,
                rule_id: bp.rule_id.clone(),
                indices: ranked,
                lower,
                upper,
                repaired,
            }
        })
        .collect();
    SelectionPlan { rules }
}
