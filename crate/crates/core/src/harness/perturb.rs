//! Building a pool of feedback rules by perturbing seed rules.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::data::{Dataset, Value};
use crate::rules::domain::rule_satisfiable;
use crate::rules::{render_rule, FeedbackRule, Op, Predicate};

/// Attempts allowed per requested rule.
pub const ATTEMPTS_PER_RULE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    ReverseOperator,
    ReplaceValue,
    AppendCondition,
}

#[derive(Clone, Debug)]
pub struct PerturbOutcome {
    pub pool: Vec<FeedbackRule>,
    pub attempts: usize,
    /// Set when the attempt cap was hit before the pool was full.
    pub warning: Option<String>,
}

/// Applies one perturbation to `rule`; `None` when the chosen perturbation
/// does not apply (for instance reversing a numeric `=`).
pub fn perturb_once<R: Rng + ?Sized>(
    rule: &FeedbackRule,
    seeds: &[FeedbackRule],
    d: &Dataset,
    kind: Perturbation,
    rng: &mut R,
) -> Option<FeedbackRule> {
    let schema = d.schema();
    let mut out = rule.clone();
    let preds = &mut out.clause.predicates;
    match kind {
        Perturbation::ReverseOperator => {
            let p = preds.choose_mut(rng)?;
            let op = p.op.reversed();
            *p = Predicate::new(schema, p.attr, op, p.value).ok()?;
        }
        Perturbation::ReplaceValue => {
            let p = preds.choose_mut(rng)?;
            let value = match p.value {
                Value::Num(_) => {
                    let (lo, hi) = d.numeric_ranges()[p.attr]?;
                    Value::Num(if lo < hi { rng.gen_range(lo..=hi) } else { lo })
                }
                Value::Cat(c) => {
                    let mut seen: Vec<usize> = d
                        .rows()
                        .iter()
                        .filter_map(|r| r.values[p.attr].as_cat())
                        .filter(|&v| v != c)
                        .collect();
                    seen.sort_unstable();
                    seen.dedup();
                    Value::Cat(*seen.choose(rng)?)
                }
            };
            *p = Predicate::new(schema, p.attr, p.op, value).ok()?;
        }
        Perturbation::AppendCondition => {
            let others: Vec<&FeedbackRule> = seeds.iter().filter(|s| s.id != rule.id).collect();
            let donor = others.choose(rng)?;
            let p = donor.clause.predicates.choose(rng)?;
            let pinned = preds.iter().any(|q| q.attr == p.attr && q.op == Op::Eq);
            if pinned || preds.contains(p) {
                return None;
            }
            preds.push(p.clone());
        }
    }
    Some(out)
}

/// Grows a pool of up to `count` distinct rules, each one perturbation away
/// from a seed rule and covering a fraction of `d` in `[lo, hi)`.
pub fn perturb_rules<R: Rng + ?Sized>(
    seeds: &[FeedbackRule],
    d: &Dataset,
    count: usize,
    bounds: (f64, f64),
    rng: &mut R,
) -> PerturbOutcome {
    let schema = d.schema();
    let cap = ATTEMPTS_PER_RULE * count;
    let mut pool = Vec::new();
    let mut seen = HashSet::new();
    let mut attempts = 0;
    let kinds = [
        Perturbation::ReverseOperator,
        Perturbation::ReplaceValue,
        Perturbation::AppendCondition,
    ];
    while pool.len() < count && attempts < cap && !seeds.is_empty() && !d.is_empty() {
        attempts += 1;
        let seed_rule = seeds.choose(rng).expect("non-empty");
        let kind = *kinds.choose(rng).expect("non-empty");
        let Some(mut candidate) = perturb_once(seed_rule, seeds, d, kind, rng) else {
            continue;
        };
        let frac = candidate.coverage(d).len() as f64 / d.len() as f64;
        if frac < bounds.0 || frac >= bounds.1 || !rule_satisfiable(schema, &candidate) {
            continue;
        }
        let text = render_rule(&candidate, schema);
        if !seen.insert(text) {
            continue;
        }
        candidate.id = format!("p{}", pool.len() + 1);
        pool.push(candidate);
    }
    let warning = (pool.len() < count).then(|| {
        format!(
            "only {} of {count} rules found after {attempts} attempts",
            pool.len()
        )
    });
    PerturbOutcome {
        pool,
        attempts,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::benchmark::loans;
    use crate::harness::extract::extract_seed_rules;
    use crate::rules::parse_rule_set;
    use crate::seed;

    #[test]
    fn reversing_le_gives_ge() {
        let d = loans(50, 0);
        let frs = parse_rule_set("IF age <= 30 THEN decision = approve", d.schema()).unwrap();
        let mut rng = seed::stream(0, "t", 0);
        let out = perturb_once(&frs.rules[0], &frs.rules, &d, Perturbation::ReverseOperator, &mut rng).unwrap();
        assert_eq!(render_rule(&out, d.schema()), "IF age >= 30 THEN class = \"approve\"");
        let eq = parse_rule_set("IF age = 30 THEN decision = approve", d.schema()).unwrap();
        assert!(perturb_once(&eq.rules[0], &eq.rules, &d, Perturbation::ReverseOperator, &mut rng).is_none());
    }

    #[test]
    fn append_skips_pinned_attributes() {
        let d = loans(50, 0);
        let frs = parse_rule_set(
            "IF status = \"single\" THEN decision = approve\nIF status != \"married\" THEN decision = deny",
            d.schema(),
        )
        .unwrap();
        let mut rng = seed::stream(0, "t", 0);
        for _ in 0..20 {
            assert!(perturb_once(&frs.rules[0], &frs.rules, &d, Perturbation::AppendCondition, &mut rng).is_none());
        }
    }

    #[test]
    fn pool_respects_coverage_bounds() {
        let d = loans(500, 3);
        let seeds = extract_seed_rules(&d, 3, 0).unwrap();
        let mut rng = seed::stream(5, "t", 0);
        let out = perturb_rules(&seeds, &d, 15, (0.05, 0.25), &mut rng);
        assert!(!out.pool.is_empty());
        for r in &out.pool {
            let f = r.coverage(&d).len() as f64 / d.len() as f64;
            assert!((0.05..0.25).contains(&f), "{f}");
        }
        let texts: HashSet<String> = out.pool.iter().map(|r| render_rule(r, d.schema())).collect();
        assert_eq!(texts.len(), out.pool.len());
    }

    #[test]
    fn too_wide_rule_is_discarded() {
        let d = loans(200, 3);
        let frs = parse_rule_set("IF age >= 18 THEN decision = approve", d.schema()).unwrap();
        let mut rng = seed::stream(0, "t", 0);
        let out = perturb_rules(&frs.rules, &d, 1, (0.0, 0.25), &mut rng);
        for r in &out.pool {
            assert!((r.coverage(&d).len() as f64) < 0.25 * 200.0);
        }
    }
}
