//! Seed rules from the root-to-leaf paths of a fitted decision tree.

use rand::SeedableRng;

use crate::data::{AttributeKind, Dataset, Value};
use crate::models::encode::{Column, Encoder};
use crate::models::tree::{DecisionTree, TreeParams};
use crate::rules::{Clause, FeedbackRule, LabelDistribution, Op, Predicate};
use crate::seed::Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExtractError {
    #[error("cannot extract rules from an empty dataset")]
    EmptyDataset,
    #[error("the tree has a single leaf, which gives no usable rule")]
    SingleLeaf,
}

#[derive(Default)]
struct Bounds {
    upper: Option<f64>,
    lower: Option<f64>,
    equal: Option<usize>,
    not_equal: Vec<usize>,
}

/// One deterministic rule per leaf of a CART tree fitted on `d`.
///
/// Numeric splits become `attr <= t` / `attr > t`, keeping only the
/// tightest bound on each side. One-hot splits become `attr != c` /
/// `attr = c`; an equality makes inequalities on the same attribute
/// redundant. Rules are named `s1`, `s2`, ... in left-first path order.
pub fn extract_seed_rules(d: &Dataset, max_depth: usize, seed: u64) -> Result<Vec<FeedbackRule>, ExtractError> {
    if d.is_empty() {
        return Err(ExtractError::EmptyDataset);
    }
    let schema = d.schema();
    let encoder = Encoder::new(schema);
    let x: Vec<Vec<f64>> = d.rows().iter().map(|r| encoder.encode(&r.values)).collect();
    let y: Vec<usize> = d.rows().iter().map(|r| r.label).collect();
    let params = TreeParams {
        max_depth,
        max_features: None,
        min_samples_split: 2,
    };
    let tree = DecisionTree::fit(&x, &y, schema.n_classes(), &params, &mut Rng::seed_from_u64(seed));
    if tree.leaf_count() < 2 {
        return Err(ExtractError::SingleLeaf);
    }
    let mut rules = Vec::new();
    for path in tree.paths() {
        let mut bounds: Vec<Bounds> = schema.attributes.iter().map(|_| Bounds::default()).collect();
        for &(feature, left, t) in &path.steps {
            match encoder.columns[feature] {
                Column::Numeric { attr } => {
                    let b = &mut bounds[attr];
                    if left {
                        b.upper = Some(b.upper.map_or(t, |u| u.min(t)));
                    } else {
                        b.lower = Some(b.lower.map_or(t, |l| l.max(t)));
                    }
                }
                Column::OneHot { attr, category } => {
                    let b = &mut bounds[attr];
                    if left {
                        if !b.not_equal.contains(&category) {
                            b.not_equal.push(category);
                        }
                    } else {
                        b.equal = Some(category);
                    }
                }
            }
        }
        let mut predicates = Vec::new();
        for (attr, b) in bounds.iter_mut().enumerate() {
            let mk = |op, value| Predicate::new(schema, attr, op, value).expect("path predicates are well-typed");
            match schema.attributes[attr].kind {
                AttributeKind::Numeric => {
                    if let Some(l) = b.lower {
                        predicates.push(mk(Op::Gt, Value::Num(l)));
                    }
                    if let Some(u) = b.upper {
                        predicates.push(mk(Op::Le, Value::Num(u)));
                    }
                }
                AttributeKind::Categorical { .. } => {
                    if let Some(c) = b.equal {
                        predicates.push(mk(Op::Eq, Value::Cat(c)));
                    } else {
                        b.not_equal.sort_unstable();
                        predicates.extend(b.not_equal.iter().map(|&c| mk(Op::Ne, Value::Cat(c))));
                    }
                }
            }
        }
        rules.push(FeedbackRule::new(
            format!("s{}", rules.len() + 1),
            Clause::new(predicates),
            LabelDistribution::delta(path.class, schema.n_classes()),
        ));
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Attribute, Instance, Schema};
    use crate::harness::benchmark::loans;
    use std::sync::Arc;

    fn threshold_data() -> Dataset {
        let schema = Arc::new(Schema::new(vec![Attribute::numeric("x")], "y", vec!["A".into(), "B".into()]).unwrap());
        let rows = (0..20)
            .map(|i| Instance {
                values: vec![Value::Num(f64::from(i))],
                label: usize::from(i >= 12),
            })
            .collect();
        Dataset::from_rows(schema, rows).unwrap()
    }

    #[test]
    fn depth_one_gives_two_rules() {
        let d = threshold_data();
        let rules = extract_seed_rules(&d, 1, 0).unwrap();
        assert_eq!(rules.len(), 2);
        let text: Vec<String> = rules.iter().map(|r| crate::rules::render_rule(r, d.schema())).collect();
        assert_eq!(text[0], "IF x <= 11.5 THEN class = \"A\"");
        assert_eq!(text[1], "IF x > 11.5 THEN class = \"B\"");
    }

    #[test]
    fn leaf_count_bound_and_coverage() {
        let d = loans(400, 2);
        for depth in 1..=3 {
            let rules = extract_seed_rules(&d, depth, 0).unwrap();
            assert!(rules.len() <= 1 << depth);
            for r in &rules {
                assert!(!r.coverage(&d).is_empty(), "{}", r.id);
            }
        }
    }

    #[test]
    fn pure_data_is_rejected() {
        let d = threshold_data();
        let low: Vec<usize> = (0..12).collect();
        assert_eq!(extract_seed_rules(&d.subset(&low), 2, 0), Err(ExtractError::SingleLeaf));
    }
}
