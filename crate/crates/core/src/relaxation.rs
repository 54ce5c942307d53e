//! Per-rule base populations, with greedy condition deletion for rules whose
//! coverage is too thin to find `k` neighbours.

use crate::data::Dataset;
use crate::parallel;
use crate::rules::{Clause, FeedbackRule, RuleGroup};

/// Outcome of relaxing one rule against a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Relaxation {
    /// The rule's clause when not relaxed, otherwise the partial clause.
    pub clause: Clause,
    pub indices: Vec<usize>,
    pub relaxed: bool,
    /// Coverage after each deletion step, starting with the unrelaxed rule.
    pub coverage_by_level: Vec<usize>,
    /// Original predicate positions deleted, in deletion order.
    pub deleted: Vec<usize>,
}

/// Deletes one condition at a time, always the one whose removal gives the
/// largest coverage, until at least `min_support` rows are covered or the
/// clause is empty. Equal coverage favours deleting the later condition.
pub fn relax_rule(rule: &FeedbackRule, d: &Dataset, min_support: usize) -> Relaxation {
    assert!(min_support >= 1, "minimum support must be at least 1");
    let indices = rule.coverage(d);
    if indices.len() >= min_support {
        return Relaxation {
            clause: rule.clause.clone(),
            coverage_by_level: vec![indices.len()],
            indices,
            relaxed: false,
            deleted: Vec::new(),
        };
    }

    let mut clause = rule.clause.clone();
    let mut positions: Vec<usize> = (0..clause.len()).collect();
    let mut support = indices.len();
    let mut coverage_by_level = vec![support];
    let mut deleted = Vec::new();
    while support < min_support && !clause.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for c in 0..clause.len() {
            let candidate = clause.without(c);
            let cov = if candidate.is_empty() {
                d.len()
            } else {
                count_satisfying(&candidate, d)
            };
            if best.is_none_or(|(_, b)| cov >= b) {
                best = Some((c, cov));
            }
        }
        let (c, cov) = best.expect("clause is non-empty");
        clause = clause.without(c);
        deleted.push(positions.remove(c));
        support = cov;
        coverage_by_level.push(cov);
    }
    Relaxation {
        indices: clause.coverage(d),
        clause,
        relaxed: true,
        coverage_by_level,
        deleted,
    }
}

fn count_satisfying(clause: &Clause, d: &Dataset) -> usize {
    d.rows().iter().filter(|r| clause.satisfied_by(&r.values)).count()
}

/// Candidate base rows for one rule group.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePopulation {
    /// Position of the group in the rule set.
    pub group: usize,
    pub rule_id: String,
    /// Member whose conditions synthetic rows must satisfy when a base row is
    /// only weakly covered.
    pub source_member: usize,
    /// `Some` when relaxed; an empty clause covers every row.
    pub relaxed_clause: Option<Clause>,
    pub member_indices: Vec<usize>,
    pub relaxed: bool,
}

impl BasePopulation {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

/// Builds one base population per rule group, requiring `k + 1` members.
///
/// A group with enough strong coverage keeps exactly its covered rows.
/// Otherwise every member rule is relaxed and the member whose partial clause
/// covers the most rows (first on ties) supplies the population.
pub fn pre_select_bp(d: &Dataset, groups: &[RuleGroup], k: usize) -> Vec<BasePopulation> {
    let min_support = k + 1;
    parallel::map_range(groups.len(), |g| {
        let group = &groups[g];
        let covered = group.coverage(d);
        if covered.len() >= min_support {
            return BasePopulation {
                group: g,
                rule_id: group.id.clone(),
                source_member: 0,
                relaxed_clause: None,
                member_indices: covered,
                relaxed: false,
            };
        }
        let mut best: Option<(usize, Relaxation)> = None;
        for (m, member) in group.members.iter().enumerate() {
            let r = relax_rule(member, d, min_support);
            if best.as_ref().is_none_or(|(_, b)| r.indices.len() > b.indices.len()) {
                best = Some((m, r));
            }
        }
        let (source_member, r) = best.expect("groups have members");
        BasePopulation {
            group: g,
            rule_id: group.id.clone(),
            source_member,
            relaxed_clause: Some(r.clause),
            member_indices: r.indices,
            relaxed: true,
        }
    })
}
