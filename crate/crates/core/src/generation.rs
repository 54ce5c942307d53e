//! Rule-constrained synthetic instances: neighbours are searched inside a
//! rule's base population, numeric values are interpolated inside the
//! rule's condition window and categorical values follow the neighbour
//! majority subject to the rule's conditions.

use std::cmp::Ordering;

use rand::Rng;

use crate::data::{Dataset, Schema, Value};
use crate::parallel;
use crate::relaxation::BasePopulation;
use crate::rules::domain::Interval;
use crate::rules::{FeedbackRule, Op, Predicate, RuleGroup};
use crate::seed;
use crate::selection::SelectionPlan;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenerationError {
    #[error("base population of rule {rule_id} has {size} rows, need at least {needed}")]
    TooFewMembers {
        rule_id: String,
        size: usize,
        needed: usize,
    },
    #[error("row {row} is not in the base population of rule {rule_id}")]
    NotAMember { rule_id: String, row: usize },
    #[error("conditions on attribute {attr} cannot be satisfied")]
    Unsatisfiable { attr: usize },
}

/// Mixed numeric/categorical distance: range-normalised absolute
/// differences and unit mismatch costs, combined as a Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMetric {
    /// `Some((min, max))` for numeric attributes.
    pub bounds: Vec<Option<(f64, f64)>>,
    pub mismatch_cost: f64,
}

impl DistanceMetric {
    pub fn from_dataset(d: &Dataset) -> Self {
        let bounds = d
            .numeric_ranges()
            .into_iter()
            .zip(&d.schema().attributes)
            .map(|(r, a)| if a.is_numeric() { Some(r.unwrap_or((0.0, 0.0))) } else { None })
            .collect();
        DistanceMetric {
            bounds,
            mismatch_cost: 1.0,
        }
    }

    /// `max - min` for a numeric attribute, 0 otherwise.
    pub fn range(&self, attr: usize) -> f64 {
        self.bounds[attr].map_or(0.0, |(lo, hi)| hi - lo)
    }

    pub fn distance(&self, a: &[Value], b: &[Value]) -> f64 {
        let mut sum = 0.0;
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            let c = match (x, y) {
                (Value::Num(x), Value::Num(y)) => {
                    let r = self.range(j);
                    if r > 0.0 {
                        (x - y).abs() / r
                    } else {
                        0.0
                    }
                }
                (Value::Cat(x), Value::Cat(y)) => {
                    if x == y {
                        0.0
                    } else {
                        self.mismatch_cost
                    }
                }
                _ => self.mismatch_cost,
            };
            sum += c * c;
        }
        sum.sqrt()
    }
}

/// The `k` candidates nearest to `target`, nearest first, ties by row index.
pub fn k_nearest(
    d: &Dataset,
    metric: &DistanceMetric,
    target: usize,
    candidates: impl Iterator<Item = usize>,
    k: usize,
) -> Vec<usize> {
    let t = &d.row(target).values;
    let mut scored: Vec<(f64, usize)> = candidates
        .filter(|&i| i != target)
        .map(|i| (metric.distance(t, &d.row(i).values), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// The `k` nearest members of `bp` to `base`, with no label constraint.
pub fn neighbors_in_rule(
    d: &Dataset,
    bp: &BasePopulation,
    base: usize,
    k: usize,
    metric: &DistanceMetric,
) -> Result<Vec<usize>, GenerationError> {
    if bp.member_indices.binary_search(&base).is_err() {
        return Err(GenerationError::NotAMember {
            rule_id: bp.rule_id.clone(),
            row: base,
        });
    }
    if bp.len() < k + 1 {
        return Err(GenerationError::TooFewMembers {
            rule_id: bp.rule_id.clone(),
            size: bp.len(),
            needed: k + 1,
        });
    }
    Ok(k_nearest(d, metric, base, bp.member_indices.iter().copied(), k))
}

fn numeric_window(attr: usize, conditions: &[&Predicate]) -> Result<(Interval, Option<f64>), GenerationError> {
    let mut window = Interval::FULL;
    let mut fixed = None;
    for p in conditions {
        let Value::Num(v) = p.value else { continue };
        if p.op == Op::Eq {
            fixed = Some(v);
        }
        if let Some(i) = Interval::from_op(p.op, v) {
            window = window.intersect(&i);
        }
    }
    if window.is_empty() {
        return Err(GenerationError::Unsatisfiable { attr });
    }
    Ok((window, fixed))
}

/// A numeric value for a synthetic instance.
///
/// An `=` condition fixes the value. Otherwise the value is drawn uniformly
/// from the segment between `base_v` and `nbr_v` clipped to the condition
/// window. When the clipped segment is empty the draw falls back to the
/// condition window, bounded by the observed attribute range `(lo, hi)`.
pub fn synthesize_numeric<R: Rng + ?Sized>(
    base_v: f64,
    nbr_v: f64,
    attr: usize,
    conditions: &[&Predicate],
    observed: (f64, f64),
    rng: &mut R,
) -> Result<f64, GenerationError> {
    let (window, fixed) = numeric_window(attr, conditions)?;
    if let Some(v) = fixed {
        return Ok(v);
    }
    let span = observed.1 - observed.0;
    let eps = (1e-9 * span).max(1e-12);
    let segment = Interval {
        lo: base_v.min(nbr_v),
        lo_open: false,
        hi: base_v.max(nbr_v),
        hi_open: false,
    };
    let clipped = segment.intersect(&window);
    let target = if !clipped.is_empty() {
        clipped
    } else {
        let hull = Interval {
            lo: observed.0.min(segment.lo),
            lo_open: false,
            hi: observed.1.max(segment.hi),
            hi_open: false,
        };
        let bounded = window.intersect(&hull);
        if !bounded.is_empty() {
            bounded
        } else {
            let reach = if span > 0.0 { span } else { 1.0 };
            let mut w = window;
            if w.lo.is_infinite() {
                w.lo = w.hi - reach;
                w.lo_open = false;
            }
            if w.hi.is_infinite() {
                w.hi = w.lo + reach;
                w.hi_open = false;
            }
            w
        }
    };
    Ok(draw(&target, eps, rng))
}

fn draw<R: Rng + ?Sized>(w: &Interval, eps: f64, rng: &mut R) -> f64 {
    let lo = if w.lo_open { w.lo + eps } else { w.lo };
    let hi = if w.hi_open { w.hi - eps } else { w.hi };
    let mid = w.lo + (w.hi - w.lo) / 2.0;
    let v = if lo < hi {
        rng.gen_range(lo..=hi)
    } else if lo == hi {
        lo
    } else {
        mid
    };
    if w.contains(v) {
        v
    } else {
        mid
    }
}

/// A category for a synthetic instance: the most frequent neighbour value
/// that satisfies every condition, else the first qualifying category in
/// schema order. Frequency ties go to the lower category index.
pub fn synthesize_categorical(
    nbr_values: &[usize],
    attr: usize,
    conditions: &[&Predicate],
    n_categories: usize,
) -> Result<usize, GenerationError> {
    let ok = |c: usize| conditions.iter().all(|p| p.holds_value(Value::Cat(c)));
    let mut counts = vec![0usize; n_categories];
    for &v in nbr_values {
        counts[v] += 1;
    }
    let mut order: Vec<usize> = (0..n_categories).filter(|&c| counts[c] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .chain(0..n_categories)
        .find(|&c| ok(c))
        .ok_or(GenerationError::Unsatisfiable { attr })
}

/// One generated row and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInstance {
    pub values: Vec<Value>,
    pub label: usize,
    pub rule_id: String,
    /// Member rule whose clause the values satisfy.
    pub member_id: String,
    pub base: usize,
    pub neighbor: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationOutcome {
    pub instances: Vec<SyntheticInstance>,
    /// Selected bases for which no rule-satisfying instance was produced.
    pub skipped: usize,
}

/// Neighbour redraws before a base instance is given up, when an exclusion
/// clause rejects the candidate.
pub const MAX_ATTEMPTS: usize = 10;

fn synthesize_from<R: Rng + ?Sized>(
    d: &Dataset,
    schema: &Schema,
    metric: &DistanceMetric,
    rule: &FeedbackRule,
    base: usize,
    nbr: usize,
    nbrs: &[usize],
    rng: &mut R,
) -> Result<Vec<Value>, GenerationError> {
    let b = &d.row(base).values;
    let n = &d.row(nbr).values;
    let mut out = Vec::with_capacity(b.len());
    for (j, attr) in schema.attributes.iter().enumerate() {
        let conditions: Vec<&Predicate> = rule.clause.on_attribute(j).collect();
        let v = match (b[j], n[j]) {
            (Value::Num(x), Value::Num(y)) => {
                let observed = metric.bounds[j].unwrap_or((x.min(y), x.max(y)));
                Value::Num(synthesize_numeric(x, y, j, &conditions, observed, rng)?)
            }
            _ => {
                let values: Vec<usize> =
                    nbrs.iter().filter_map(|&i| d.row(i).values[j].as_cat()).collect();
                Value::Cat(synthesize_categorical(&values, j, &conditions, attr.categories().len())?)
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// One synthetic instance per planned base row, in plan order.
///
/// Each base row draws its neighbour, values and label from its own stream
/// derived from `master` and the base's ordinal in the plan, so the result
/// does not depend on scheduling. Populations with fewer than two rows are
/// skipped; smaller populations use `min(k, |bp| - 1)` neighbours.
pub fn generate(
    d: &Dataset,
    groups: &[RuleGroup],
    bps: &[BasePopulation],
    plan: &SelectionPlan,
    k: usize,
    master: u64,
) -> Result<GenerationOutcome, GenerationError> {
    let metric = DistanceMetric::from_dataset(d);
    let schema = d.schema();
    let jobs: Vec<(usize, usize)> = plan.flatten();
    let results = parallel::map_range(jobs.len(), |ordinal| {
        let (b, row) = jobs[ordinal];
        let bp = &bps[b];
        if bp.len() < 2 {
            return Ok(None);
        }
        let k_eff = k.min(bp.len() - 1).max(1);
        let nbrs = neighbors_in_rule(d, bp, row, k_eff, &metric)?;
        let group = &groups[bp.group];
        let member = group
            .covering_member(&d.row(row).values)
            .unwrap_or(bp.source_member);
        let rule = &group.members[member];
        let mut rng = seed::stream(master, "generate", ordinal as u64);
        for _ in 0..MAX_ATTEMPTS {
            let nbr = nbrs[rng.gen_range(0..nbrs.len())];
            let values = synthesize_from(d, schema, &metric, rule, row, nbr, &nbrs, &mut rng)?;
            if rule.satisfies(&values) {
                let label = rule.distribution.sample(&mut rng);
                return Ok(Some(SyntheticInstance {
                    values,
                    label,
                    rule_id: group.id.clone(),
                    member_id: rule.id.clone(),
                    base: row,
                    neighbor: nbr,
                }));
            }
        }
        Ok(None)
    });
    let mut out = GenerationOutcome::default();
    for r in results {
        match r? {
            Some(s) => out.instances.push(s),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Orders candidate rows by distance to `target` (ties by index); used by
/// tests as an independent check on [`k_nearest`].
pub fn distance_order(d: &Dataset, metric: &DistanceMetric, target: usize) -> Vec<usize> {
    let t = &d.row(target).values;
    let mut idx: Vec<usize> = (0..d.len()).filter(|&i| i != target).collect();
    idx.sort_by(|&a, &b| {
        metric
            .distance(t, &d.row(a).values)
            .partial_cmp(&metric.distance(t, &d.row(b).values))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Attribute, Instance, Provenance};
    use crate::relaxation::pre_select_bp;
    use crate::rules::parse_rule_set;
    use crate::selection::{select_random, SelectionPlan};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    Attribute::numeric("x"),
                    Attribute::categorical("colour", ["red", "blue", "green"]),
                ],
                "y",
                vec!["A".into(), "B".into()],
            )
            .unwrap(),
        )
    }

    fn data(points: &[(f64, usize, usize)]) -> Dataset {
        let rows = points
            .iter()
            .map(|&(x, c, y)| Instance {
                values: vec![Value::Num(x), Value::Cat(c)],
                label: y,
            })
            .collect();
        Dataset::from_rows(schema(), rows).unwrap()
    }

    fn pred(text: &str) -> Predicate {
        let frs = parse_rule_set(&format!("IF {text} THEN y = A"), &schema()).unwrap();
        frs.rules[0].clause.predicates[0].clone()
    }

    #[test]
    fn one_dimensional_neighbours() {
        let d = data(&[0.0, 1.0, 2.0, 3.0, 9.0, 10.0, 11.0].map(|x| (x, 0, 0)));
        let frs = parse_rule_set("IF x < 100 THEN y = A", &schema()).unwrap();
        let groups = frs.merge_overlapping(&schema());
        let bps = pre_select_bp(&d, &groups, 3);
        let m = DistanceMetric::from_dataset(&d);
        assert_eq!(neighbors_in_rule(&d, &bps[0], 0, 3, &m).unwrap(), vec![1, 2, 3]);
        assert!(neighbors_in_rule(&d, &bps[0], 0, 7, &m).is_err());
    }

    #[test]
    fn neighbour_ties_prefer_lower_index() {
        let d = data(&[(5.0, 0, 0), (4.0, 0, 0), (6.0, 0, 1), (0.0, 0, 0), (10.0, 0, 0)]);
        let m = DistanceMetric::from_dataset(&d);
        assert_eq!(k_nearest(&d, &m, 0, 0..5, 2), vec![1, 2]);
        assert_eq!(k_nearest(&d, &m, 0, 0..5, 4), distance_order(&d, &m, 0));
    }

    #[test]
    fn equality_condition_assigns_value() {
        let p = pred("x = 7");
        let mut rng = seed::stream(0, "t", 0);
        assert_eq!(synthesize_numeric(0.0, 1.0, 0, &[&p], (0.0, 10.0), &mut rng), Ok(7.0));
    }

    #[test]
    fn strict_window_draws() {
        let p = pred("x < 5");
        let mut rng = seed::stream(1, "t", 0);
        for _ in 0..100_000 {
            let v = synthesize_numeric(2.0, 8.0, 0, &[&p], (0.0, 10.0), &mut rng).unwrap();
            assert!((2.0..5.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn segment_outside_window_falls_back() {
        let p = pred("x > 20");
        let mut rng = seed::stream(2, "t", 0);
        for _ in 0..1000 {
            let v = synthesize_numeric(2.0, 8.0, 0, &[&p], (0.0, 10.0), &mut rng).unwrap();
            assert!(v > 20.0 && v <= 30.0, "{v}");
        }
        let q = pred("x > 5");
        for _ in 0..1000 {
            let v = synthesize_numeric(1.0, 2.0, 0, &[&q], (0.0, 10.0), &mut rng).unwrap();
            assert!(v > 5.0 && v <= 10.0, "{v}");
        }
    }

    #[test]
    fn categorical_majority_and_conditions() {
        let (red, blue, green) = (0, 1, 2);
        let nbrs = [red, red, red, blue, blue];
        assert_eq!(synthesize_categorical(&nbrs, 1, &[], 3), Ok(red));
        let not_red = pred("colour != \"red\"");
        assert_eq!(synthesize_categorical(&nbrs, 1, &[&not_red], 3), Ok(blue));
        let is_green = pred("colour = \"green\"");
        assert_eq!(synthesize_categorical(&[red; 4], 1, &[&is_green], 3), Ok(green));
        let not_blue = pred("colour != \"blue\"");
        assert!(synthesize_categorical(&nbrs, 1, &[&is_green, &not_blue, &not_red], 3).is_ok());
        let is_red = pred("colour = \"red\"");
        assert!(synthesize_categorical(&nbrs, 1, &[&is_green, &is_red], 3).is_err());
    }

    fn generate_all(frs_text: &str, d: &Dataset, eta: usize, seed_: u64) -> GenerationOutcome {
        let frs = parse_rule_set(frs_text, &schema()).unwrap();
        let groups = frs.merge_overlapping(&schema());
        let bps = pre_select_bp(d, &groups, 5);
        let plan = select_random(&bps, eta, &mut seed::stream(seed_, "select", 0));
        generate(d, &groups, &bps, &plan, 5, seed_).unwrap()
    }

    fn grid() -> Dataset {
        let pts: Vec<(f64, usize, usize)> =
            (0..60).map(|i| (f64::from(i) / 6.0, (i % 3) as usize, (i % 2) as usize)).collect();
        data(&pts)
    }

    #[test]
    fn generated_rows_satisfy_the_unrelaxed_rule() {
        let d = grid();
        let text = "IF x > 3 AND x <= 7.5 AND colour != \"green\" THEN y = B\nIF x > 100 AND colour = \"red\" THEN y = A";
        let frs = parse_rule_set(text, &schema()).unwrap();
        let out = generate_all(text, &d, 40, 3);
        assert!(!out.instances.is_empty());
        for s in &out.instances {
            let rule = frs.get(&s.member_id).unwrap();
            assert!(rule.satisfies(&s.values), "{s:?}");
            assert_eq!(s.label, rule.distribution.deterministic_class().unwrap());
        }
        // The relaxed second rule still yields instances inside its own clause.
        assert!(out.instances.iter().any(|s| s.rule_id == "r2"));
    }

    #[test]
    fn probabilistic_labels_follow_the_distribution() {
        let d = grid();
        let out = generate_all("IF x >= 0 THEN y ~ {A: 0.8, B: 0.2}", &d, 2000, 4);
        let a = out.instances.iter().filter(|s| s.label == 0).count() as f64;
        let f = a / out.instances.len() as f64;
        assert!((0.75..=0.85).contains(&f), "{f}");
    }

    #[test]
    fn deterministic_across_scheduling() {
        let d = grid();
        let text = "IF x > 2 AND colour = \"blue\" THEN y = A";
        let a = generate_all(text, &d, 30, 9);
        crate::parallel::set_enabled(false);
        let b = generate_all(text, &d, 30, 9);
        crate::parallel::set_enabled(true);
        assert_eq!(a, b);
    }

    #[test]
    fn exclusions_are_respected() {
        let d = grid();
        let text = "IF x >= 0 UNLESS x < 5 THEN y = A";
        let out = generate_all(text, &d, 50, 5);
        assert!(out.instances.iter().all(|s| s.values[0].as_num().unwrap() >= 5.0));
    }

    #[test]
    fn empty_plan() {
        let d = grid();
        let out = generate(&d, &[], &[], &SelectionPlan::default(), 5, 0).unwrap();
        assert!(out.instances.is_empty());
        let _ = Provenance::Original;
    }

    proptest! {
        #[test]
        fn metric_is_a_semimetric(
            a in prop::collection::vec((-50.0f64..50.0, 0usize..3), 3),
            b in prop::collection::vec((-50.0f64..50.0, 0usize..3), 3),
        ) {
            let pts: Vec<(f64, usize, usize)> =
                a.iter().chain(&b).map(|&(x, c)| (x, c, 0)).collect();
            let d = data(&pts);
            let m = DistanceMetric::from_dataset(&d);
            for i in 0..d.len() {
                let x = &d.row(i).values;
                prop_assert_eq!(m.distance(x, x), 0.0);
                for j in 0..d.len() {
                    let y = &d.row(j).values;
                    prop_assert!(m.distance(x, y) >= 0.0);
                    prop_assert_eq!(m.distance(x, y), m.distance(y, x));
                }
            }
        }

        #[test]
        fn unconstrained_values_stay_on_the_segment(b in -100.0f64..100.0, n in -100.0f64..100.0, s in 0u64..1000) {
            let mut rng = seed::stream(s, "t", 0);
            let v = synthesize_numeric(b, n, 0, &[], (-100.0, 100.0), &mut rng).unwrap();
            prop_assert!(v >= b.min(n) && v <= b.max(n));
        }
    }
}
