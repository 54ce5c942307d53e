//! Feedback rules: clauses, label distributions, coverage, and the conflict
//! resolution and merging that make a rule set's coverage disjoint.

pub mod domain;
mod dsl;

use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Schema, Value};

pub use dsl::{parse_rule_set, render_rule, render_rule_set, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("rule set has conflicting rules: {}", fmt_pairs(.0))]
    Conflicts(Vec<(String, String)>),
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
    #[error("invalid label distribution: {0}")]
    InvalidDistribution(String),
}

fn fmt_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a}/{b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
        }
    }

    /// Operator with the opposite sense: `=`/`!=`, `<=`/`>=`, `<`/`>`.
    pub fn reversed(self) -> Op {
        match self {
            Op::Eq => Op::Ne,
            Op::Ne => Op::Eq,
            Op::Lt => Op::Gt,
            Op::Gt => Op::Lt,
            Op::Le => Op::Ge,
            Op::Ge => Op::Le,
        }
    }

    pub fn allowed_for_categorical(self) -> bool {
        matches!(self, Op::Eq | Op::Ne)
    }

    pub fn allowed_for_numeric(self) -> bool {
        !matches!(self, Op::Ne)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `(attribute, operator, value)`, with the attribute as a schema index.
#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub attr: usize,
    pub op: Op,
    pub value: Value,
}

impl Predicate {
    /// Builds a predicate after checking it against the schema.
    pub fn new(schema: &Schema, attr: usize, op: Op, value: Value) -> Result<Self, RuleError> {
        let a = schema
            .attributes
            .get(attr)
            .ok_or_else(|| RuleError::InvalidPredicate(format!("no attribute {attr}")))?;
        match value {
            Value::Num(x) if a.is_numeric() => {
                if !op.allowed_for_numeric() {
                    return Err(RuleError::InvalidPredicate(format!(
                        "operator `{op}` is not allowed on numeric attribute `{}`",
                        a.name
                    )));
                }
                if !x.is_finite() {
                    return Err(RuleError::InvalidPredicate(format!(
                        "non-finite threshold on `{}`",
                        a.name
                    )));
                }
            }
            Value::Cat(c) if !a.is_numeric() => {
                if !op.allowed_for_categorical() {
                    return Err(RuleError::InvalidPredicate(format!(
                        "operator `{op}` is not allowed on categorical attribute `{}`",
                        a.name
                    )));
                }
                if c >= a.categories().len() {
                    return Err(RuleError::InvalidPredicate(format!(
                        "category index {c} out of range for `{}`",
                        a.name
                    )));
                }
            }
            _ => {
                return Err(RuleError::InvalidPredicate(format!(
                    "value kind does not match attribute `{}`",
                    a.name
                )))
            }
        }
        Ok(Predicate { attr, op, value })
    }

    pub fn holds(&self, values: &[Value]) -> bool {
        self.holds_value(values[self.attr])
    }

    /// Evaluates the predicate on a single value of its attribute.
    pub fn holds_value(&self, x: Value) -> bool {
        match (x, self.value) {
            (Value::Num(x), Value::Num(v)) => match self.op {
                Op::Eq => x == v,
                Op::Ne => x != v,
                Op::Lt => x < v,
                Op::Le => x <= v,
                Op::Gt => x > v,
                Op::Ge => x >= v,
            },
            (Value::Cat(x), Value::Cat(v)) => match self.op {
                Op::Eq => x == v,
                Op::Ne => x != v,
                _ => false,
            },
            _ => false,
        }
    }
}

/// Conjunction of predicates. An empty clause is satisfied by everything; it
/// only arises from relaxation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Clause {
    pub predicates: Vec<Predicate>,
}

impl Clause {
    pub fn new(predicates: Vec<Predicate>) -> Self {
        Clause { predicates }
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn satisfied_by(&self, values: &[Value]) -> bool {
        self.predicates.iter().all(|p| p.holds(values))
    }

    /// Clause without the predicate at `index`.
    pub fn without(&self, index: usize) -> Clause {
        let mut predicates = self.predicates.clone();
        predicates.remove(index);
        Clause { predicates }
    }

    /// Conjunction of both clauses.
    pub fn and(&self, other: &Clause) -> Clause {
        let mut predicates = self.predicates.clone();
        predicates.extend(other.predicates.iter().cloned());
        Clause { predicates }
    }

    /// Predicates that constrain attribute `attr`.
    pub fn on_attribute(&self, attr: usize) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(move |p| p.attr == attr)
    }

    /// Row indices of `d` satisfying the clause.
    pub fn coverage(&self, d: &Dataset) -> Vec<usize> {
        (0..d.len())
            .filter(|&i| self.satisfied_by(&d.row(i).values))
            .collect()
    }
}

/// Probability of each class label, indexed like [`Schema::classes`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Point mass on `class`.
    pub fn delta(class: usize, n_classes: usize) -> Self {
        let mut probs = vec![0.0; n_classes];
        probs[class] = 1.0;
        LabelDistribution { probs }
    }

    pub fn new(probs: Vec<f64>) -> Result<Self, RuleError> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(RuleError::InvalidDistribution(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(RuleError::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(LabelDistribution { probs })
    }

    /// `w * a + (1 - w) * b`.
    pub fn mixture(a: &Self, b: &Self, w: f64) -> Self {
        LabelDistribution {
            probs: a
                .probs
                .iter()
                .zip(&b.probs)
                .map(|(x, y)| w * x + (1.0 - w) * y)
                .collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.probs.get(class).copied().unwrap_or(0.0)
    }

    /// The class carrying all the mass, if there is one.
    pub fn deterministic_class(&self) -> Option<usize> {
        self.probs.iter().position(|&p| p == 1.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(c, _)| c)
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.probs.len() == other.probs.len()
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    }

    /// Draws a class label.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        if let Some(c) = self.deterministic_class() {
            return c;
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (c, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = c;
            if u < acc {
                return c;
            }
        }
        last
    }
}

/// `IF clause [UNLESS exclusion]* THEN label ~ distribution`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackRule {
    pub id: String,
    pub clause: Clause,
    /// An instance satisfying any of these clauses is not covered.
    pub exclusions: Vec<Clause>,
    pub distribution: LabelDistribution,
}

impl FeedbackRule {
    pub fn new(id: impl Into<String>, clause: Clause, distribution: LabelDistribution) -> Self {
        FeedbackRule {
            id: id.into(),
            clause,
            exclusions: Vec::new(),
            distribution,
        }
    }

    pub fn satisfies(&self, values: &[Value]) -> bool {
        self.clause.satisfied_by(values) && !self.exclusions.iter().any(|e| e.satisfied_by(values))
    }

    /// Row indices of `d` the rule covers. Labels play no part.
    pub fn coverage(&self, d: &Dataset) -> Vec<usize> {
        (0..d.len())
            .filter(|&i| self.satisfies(&d.row(i).values))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeedbackRuleSet {
    pub rules: Vec<FeedbackRule>,
}

/// How to resolve a pair of conflicting rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum ConflictPolicy {
    /// Each rule excludes the other's clause.
    ExcludeIntersection,
    /// As above, plus a new rule on the intersection with distribution
    /// `weight * pi_1 + (1 - weight) * pi_2`.
    Mixture { weight: f64 },
}

const MAX_RESOLUTION_STEPS: usize = 10_000;

impl FeedbackRuleSet {
    pub fn new(rules: Vec<FeedbackRule>) -> Self {
        FeedbackRuleSet { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FeedbackRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Row indices covered by at least one rule, ascending.
    pub fn coverage(&self, d: &Dataset) -> Vec<usize> {
        (0..d.len())
            .filter(|&i| self.rules.iter().any(|r| r.satisfies(&d.row(i).values)))
            .collect()
    }

    fn conflicting_index_pairs(&self, schema: &Schema) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.rules.len() {
            for j in i + 1..self.rules.len() {
                let (a, b) = (&self.rules[i], &self.rules[j]);
                if !a.distribution.approx_eq(&b.distribution)
                    && domain::rules_intersect(schema, a, b)
                {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Pairs of rules whose coverages intersect somewhere in the domain while
    /// prescribing different label distributions.
    pub fn detect_conflicts(&self, schema: &Schema) -> Vec<(String, String)> {
        self.conflicting_index_pairs(schema)
            .into_iter()
            .map(|(i, j)| (self.rules[i].id.clone(), self.rules[j].id.clone()))
            .collect()
    }

    /// Resolves conflicts one pair at a time until none remain.
    pub fn resolve_conflicts(&self, schema: &Schema, policy: ConflictPolicy) -> FeedbackRuleSet {
        let mut out = self.clone();
        for _ in 0..MAX_RESOLUTION_STEPS {
            let Some(&(i, j)) = out.conflicting_index_pairs(schema).first() else {
                break;
            };
            let (a, b) = (out.rules[i].clone(), out.rules[j].clone());
            out.rules[i].exclusions.push(b.clause.clone());
            out.rules[j].exclusions.push(a.clause.clone());
            // Excluding the other clause also removes the points the other
            // rule itself excluded; each of those comes back as a piece.
            for (keep, other) in [(&a, &b), (&b, &a)] {
                for (n, hole) in other.exclusions.iter().enumerate() {
                    let piece = FeedbackRule {
                        id: format!("{}-{}.{}", keep.id, other.id, n + 1),
                        clause: keep.clause.and(&other.clause).and(hole),
                        exclusions: keep.exclusions.clone(),
                        distribution: keep.distribution.clone(),
                    };
                    if domain::rule_satisfiable(schema, &piece) {
                        out.rules.push(piece);
                    }
                }
            }
            if let ConflictPolicy::Mixture { weight } = policy {
                let mut exclusions = a.exclusions.clone();
                exclusions.extend(b.exclusions.iter().cloned());
                out.rules.push(FeedbackRule {
                    id: format!("{}&{}", a.id, b.id),
                    clause: a.clause.and(&b.clause),
                    exclusions,
                    distribution: LabelDistribution::mixture(
                        &a.distribution,
                        &b.distribution,
                        weight,
                    ),
                });
            }
        }
        out
    }

    /// Groups rules whose coverages overlap with identical distributions
    /// (transitively). Each group behaves as one rule whose satisfaction is
    /// the disjunction of its members'.
    pub fn merge_overlapping(&self, schema: &Schema) -> Vec<RuleGroup> {
        let n = self.rules.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.rules[i], &self.rules[j]);
                if a.distribution.approx_eq(&b.distribution)
                    && domain::rules_intersect(schema, a, b)
                {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut groups: Vec<(usize, Vec<FeedbackRule>)> = Vec::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            match groups.iter_mut().find(|(r, _)| *r == root) {
                Some((_, members)) => members.push(self.rules[i].clone()),
                None => groups.push((root, vec![self.rules[i].clone()])),
            }
        }
        groups
            .into_iter()
            .map(|(_, members)| RuleGroup::new(members))
            .collect()
    }
}

/// Rules sharing one label distribution; covers an instance if any member
/// does. Most groups have a single member.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleGroup {
    pub id: String,
    pub members: Vec<FeedbackRule>,
}

impl RuleGroup {
    pub fn new(members: Vec<FeedbackRule>) -> Self {
        assert!(!members.is_empty(), "a rule group needs at least one member");
        let id = members
            .iter()
            .map(|m| m.id.as_str())
            .collect::<Vec<_>>()
            .join("+");
        RuleGroup { id, members }
    }

    pub fn single(rule: FeedbackRule) -> Self {
        RuleGroup::new(vec![rule])
    }

    pub fn distribution(&self) -> &LabelDistribution {
        &self.members[0].distribution
    }

    pub fn covers(&self, values: &[Value]) -> bool {
        self.members.iter().any(|m| m.satisfies(values))
    }

    /// Index of the first member satisfied by `values`.
    pub fn covering_member(&self, values: &[Value]) -> Option<usize> {
        self.members.iter().position(|m| m.satisfies(values))
    }

    pub fn coverage(&self, d: &Dataset) -> Vec<usize> {
        (0..d.len())
            .filter(|&i| self.covers(&d.row(i).values))
            .collect()
    }
}

/// Index of the first group covering `values`.
pub fn covering_group(groups: &[RuleGroup], values: &[Value]) -> Option<usize> {
    groups.iter().position(|g| g.covers(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Attribute, Instance};
    use crate::seed;
    use std::sync::Arc;

    fn schema() -> Schema {
        Schema::new(
            vec![
                Attribute::numeric("age"),
                Attribute::categorical("status", ["single", "married"]),
            ],
            "class",
            vec!["approve".into(), "deny".into()],
        )
        .unwrap()
    }

    fn parse(text: &str) -> FeedbackRuleSet {
        parse_rule_set(text, &schema()).unwrap()
    }

    fn inst(age: f64, status: usize) -> Vec<Value> {
        vec![Value::Num(age), Value::Cat(status)]
    }

    #[test]
    fn satisfaction_with_exclusion() {
        let frs = parse("IF age < 29 AND status = \"single\" THEN class = \"approve\"");
        let r = &frs.rules[0];
        assert!(r.satisfies(&inst(25.0, 0)));
        assert!(!r.satisfies(&inst(30.0, 0)));
        let mut excl = r.clone();
        excl.exclusions
            .push(parse("IF age < 20 THEN class = \"approve\"").rules[0].clause.clone());
        assert!(!excl.satisfies(&inst(18.0, 0)));
        assert!(excl.satisfies(&inst(25.0, 0)));
    }

    #[test]
    fn coverage_sets() {
        let s = Arc::new(schema());
        let rows = [10.0, 50.0, 12.0, 60.0]
            .iter()
            .map(|&a| Instance {
                values: inst(a, 0),
                label: 0,
            })
            .collect();
        let d = Dataset::from_rows(s.clone(), rows).unwrap();
        let frs = parse("IF age < 20 THEN class = \"approve\"\nIF age > 55 THEN class = \"deny\"");
        assert_eq!(frs.rules[0].coverage(&d), vec![0, 2]);
        assert_eq!(frs.coverage(&d), vec![0, 2, 3]);
        assert!(frs.coverage(&Dataset::new(s)).is_empty());
    }

    #[test]
    fn conflict_detection_cases() {
        let nested = parse("IF age < 30 THEN class = \"approve\"\nIF age < 20 THEN class = \"deny\"");
        assert_eq!(
            nested.detect_conflicts(&schema()),
            vec![("r1".to_string(), "r2".to_string())]
        );
        let same = parse("IF age < 30 THEN class = \"approve\"\nIF age < 20 THEN class = \"approve\"");
        assert!(same.detect_conflicts(&schema()).is_empty());
        let apart = parse("IF age < 10 THEN class = \"approve\"\nIF age > 20 THEN class = \"deny\"");
        assert!(apart.detect_conflicts(&schema()).is_empty());
        let touching =
            parse("IF age <= 10 THEN class = \"approve\"\nIF age >= 10 THEN class = \"deny\"");
        assert_eq!(touching.detect_conflicts(&schema()).len(), 1);
        let cats = parse(
            "IF status = \"single\" THEN class = \"approve\"\nIF status != \"single\" THEN class = \"deny\"",
        );
        assert!(cats.detect_conflicts(&schema()).is_empty());
    }

    #[test]
    fn resolve_exclude_and_mixture() {
        let s = schema();
        let frs = parse("IF age < 30 THEN class = \"approve\"\nIF age < 20 THEN class = \"deny\"");
        let ex = frs.resolve_conflicts(&s, ConflictPolicy::ExcludeIntersection);
        assert_eq!(ex.rules.len(), 2);
        assert_eq!(ex.rules[0].exclusions, vec![frs.rules[1].clause.clone()]);
        assert!(ex.detect_conflicts(&s).is_empty());

        let mix = frs.resolve_conflicts(&s, ConflictPolicy::Mixture { weight: 0.5 });
        assert_eq!(mix.rules.len(), 3);
        let third = &mix.rules[2];
        assert_eq!(third.clause.predicates.len(), 2);
        assert_eq!(third.distribution.probs(), &[0.5, 0.5]);
        assert!(mix.detect_conflicts(&s).is_empty());
        assert!(third.satisfies(&inst(15.0, 1)));
        assert!(!mix.rules[0].satisfies(&inst(15.0, 1)));

        let clean = parse("IF age < 10 THEN class = \"approve\"");
        assert_eq!(clean.resolve_conflicts(&s, ConflictPolicy::ExcludeIntersection), clean);
    }

    #[test]
    fn merge_groups() {
        let s = schema();
        let frs = parse("IF age < 30 THEN class = \"approve\"\nIF age < 40 THEN class = \"approve\"");
        let groups = frs.merge_overlapping(&s);
        assert_eq!(groups.len(), 1);
        assert!(groups[0].covers(&inst(35.0, 0)));
        assert!(!groups[0].covers(&inst(45.0, 0)));
        assert_eq!(groups[0].id, "r1+r2");

        let chain = parse(
            "IF age < 10 THEN class = \"approve\"\n\
             IF age > 50 THEN class = \"approve\"\n\
             IF age >= 5 AND age <= 60 THEN class = \"approve\"",
        );
        let groups = chain.merge_overlapping(&s);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members.len(), 3);

        let apart = parse("IF age < 10 THEN class = \"approve\"\nIF age > 20 THEN class = \"approve\"");
        assert_eq!(apart.merge_overlapping(&s).len(), 2);
    }

    #[test]
    fn sampling_frequencies() {
        let delta = LabelDistribution::delta(1, 2);
        let mut rng = seed::stream(11, "labels", 0);
        assert!((0..100).all(|_| delta.sample(&mut rng) == 1));
        for (p, lo, hi) in [(0.5, 0.48, 0.52), (0.8, 0.78, 0.82)] {
            let dist = LabelDistribution::new(vec![p, 1.0 - p]).unwrap();
            let hits = (0..10_000).filter(|_| dist.sample(&mut rng) == 0).count();
            let freq = hits as f64 / 10_000.0;
            assert!(freq >= lo && freq <= hi, "p={p} freq={freq}");
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(LabelDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(LabelDistribution::new(vec![1.2, -0.2]).is_err());
        assert!(LabelDistribution::new(vec![0.3, 0.7]).is_ok());
        assert_eq!(LabelDistribution::delta(0, 3).deterministic_class(), Some(0));
    }
}
