//! Rule satisfiability, intersection, conflict resolution and coverage
//! checked against brute-force enumeration.
//!
//! Thresholds are integers in `0..=5`, so every non-empty region built from
//! them contains a point of the half-integer grid `-0.5, 0, 0.5, ..., 5.5`.

use std::sync::Arc;

use proptest::prelude::*;
use ruleaug::rules::domain::{rule_satisfiable, rules_intersect};
use ruleaug::{
    Attribute, Clause, ConflictPolicy, Dataset, FeedbackRule, FeedbackRuleSet, Instance, LabelDistribution, Op,
    Predicate, Schema, Value,
};

fn schema() -> Schema {
    Schema::new(
        vec![
            Attribute::numeric("a"),
            Attribute::numeric("b"),
            Attribute::categorical("c", ["x", "y", "z"]),
        ],
        "label",
        vec!["p".into(), "n".into()],
    )
    .unwrap()
}

fn grid() -> Vec<Vec<Value>> {
    let axis: Vec<f64> = (-1..=11).map(|i| f64::from(i) / 2.0).collect();
    let mut out = Vec::new();
    for &a in &axis {
        for &b in &axis {
            for c in 0..3 {
                out.push(vec![Value::Num(a), Value::Num(b), Value::Cat(c)]);
            }
        }
    }
    out
}

fn holds(p: &Predicate, values: &[Value]) -> bool {
    let (x, v) = match (values[p.attr], p.value) {
        (Value::Num(x), Value::Num(v)) => (x, v),
        (Value::Cat(x), Value::Cat(v)) => (x as f64, v as f64),
        _ => unreachable!(),
    };
    match p.op {
        Op::Eq => x == v,
        Op::Ne => x != v,
        Op::Lt => x < v,
        Op::Le => x <= v,
        Op::Gt => x > v,
        Op::Ge => x >= v,
    }
}

fn clause_holds(c: &Clause, values: &[Value]) -> bool {
    c.predicates.iter().all(|p| holds(p, values))
}

fn covers(r: &FeedbackRule, values: &[Value]) -> bool {
    clause_holds(&r.clause, values) && !r.exclusions.iter().any(|e| clause_holds(e, values))
}

fn arb_predicate() -> impl Strategy<Value = Predicate> {
    prop_oneof![
        (0..2usize, 0..5usize, 0..=5u8).prop_map(|(attr, op, t)| {
            let op = [Op::Eq, Op::Lt, Op::Le, Op::Gt, Op::Ge][op];
            Predicate::new(&schema(), attr, op, Value::Num(f64::from(t))).unwrap()
        }),
        (any::<bool>(), 0..3usize).prop_map(|(eq, c)| {
            Predicate::new(&schema(), 2, if eq { Op::Eq } else { Op::Ne }, Value::Cat(c)).unwrap()
        }),
    ]
}

fn arb_clause() -> impl Strategy<Value = Clause> {
    prop::collection::vec(arb_predicate(), 1..4).prop_map(Clause::new)
}

fn arb_rule() -> impl Strategy<Value = FeedbackRule> {
    (arb_clause(), prop::collection::vec(arb_clause(), 0..3), 0..2usize).prop_map(|(clause, exclusions, class)| {
        let mut r = FeedbackRule::new("r", clause, LabelDistribution::delta(class, 2));
        r.exclusions = exclusions;
        r
    })
}

fn arb_rule_set() -> impl Strategy<Value = FeedbackRuleSet> {
    prop::collection::vec(arb_rule(), 1..5).prop_map(|mut rules| {
        for (i, r) in rules.iter_mut().enumerate() {
            r.id = format!("r{}", i + 1);
        }
        FeedbackRuleSet::new(rules)
    })
}

fn dataset(points: &[(u8, u8, usize)]) -> Dataset {
    let rows = points
        .iter()
        .map(|&(a, b, c)| Instance {
            values: vec![Value::Num(f64::from(a) / 2.0), Value::Num(f64::from(b) / 2.0), Value::Cat(c)],
            label: 0,
        })
        .collect();
    Dataset::from_rows(Arc::new(schema()), rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn satisfiability_matches_grid(r in arb_rule()) {
        let s = schema();
        let oracle = grid().iter().any(|v| covers(&r, v));
        prop_assert_eq!(rule_satisfiable(&s, &r), oracle);
    }

    #[test]
    fn intersection_matches_grid(a in arb_rule(), b in arb_rule()) {
        let s = schema();
        let oracle = grid().iter().any(|v| covers(&a, v) && covers(&b, v));
        prop_assert_eq!(rules_intersect(&s, &a, &b), oracle);
        prop_assert_eq!(rules_intersect(&s, &b, &a), oracle);
    }

    #[test]
    fn resolution_removes_conflicts_and_keeps_sole_coverage(frs in arb_rule_set(), mixture in any::<bool>()) {
        let s = schema();
        let policy = if mixture { ConflictPolicy::Mixture { weight: 0.5 } } else { ConflictPolicy::ExcludeIntersection };
        let resolved = frs.resolve_conflicts(&s, policy);
        prop_assert!(resolved.detect_conflicts(&s).is_empty());
        for v in grid() {
            let before: Vec<&FeedbackRule> = frs.rules.iter().filter(|r| covers(r, &v)).collect();
            let after: Vec<&FeedbackRule> = resolved.rules.iter().filter(|r| covers(r, &v)).collect();
            for (i, x) in after.iter().enumerate() {
                for y in &after[i + 1..] {
                    prop_assert!(x.distribution.approx_eq(&y.distribution), "{} and {} still conflict", x.id, y.id);
                }
            }
            if before.len() == 1 {
                prop_assert!(!after.is_empty());
                prop_assert!(after.iter().all(|r| r.distribution.approx_eq(&before[0].distribution)));
            }
        }
    }

    #[test]
    fn coverage_matches_linear_scan(
        frs in arb_rule_set(),
        points in prop::collection::vec((0..=11u8, 0..=11u8, 0..3usize), 0..60),
    ) {
        let d = dataset(&points);
        let mut union = Vec::new();
        for r in &frs.rules {
            let scan: Vec<usize> = (0..d.len()).filter(|&i| covers(r, &d.row(i).values)).collect();
            prop_assert_eq!(r.coverage(&d), scan.clone());
            union.extend(scan);
        }
        union.sort_unstable();
        union.dedup();
        prop_assert_eq!(frs.coverage(&d), union);
    }
}
