//! Model-rule agreement, outside-coverage F1 and the two scores built from
//! them: the training-time loss Ĵ and the coverage-weighted test score J̄.

use serde::Serialize;

use crate::data::Dataset;
use crate::models::Classifier;
use crate::parallel;
use crate::rules::{covering_group, RuleGroup};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ObjectiveError {
    #[error("cannot score an empty test set")]
    EmptyTestSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleAgreement {
    pub rule_id: String,
    /// Rows the agreement was measured on.
    pub covered: usize,
    /// `None` when no row was available.
    pub agreement: Option<f64>,
    /// The rows came from a candidate batch because the scored dataset has
    /// none in this rule's coverage.
    pub from_candidate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `0.5 (1 - MRA) + 0.5 (1 - F1)`; lower is better.
    FixedHalf,
    /// Coverage-probability weighted agreement and F1; higher is better.
    Coverage,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectiveReport {
    pub per_rule: Vec<RuleAgreement>,
    /// Coverage-weighted mean over rules with at least one row.
    pub mra: Option<f64>,
    pub outside_f1: Option<f64>,
    pub outside_rows: usize,
    pub total_rows: usize,
    pub j_value: f64,
    pub weighting: Weighting,
}

/// F1 of class 1 for two classes, otherwise the macro average over the
/// classes that occur in `truth` or `pred`. A class with no true or predicted
/// instances scores 1.
pub fn f1_score(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let f1 = |c: usize| {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom == 0 {
            1.0
        } else {
            2.0 * tp[c] as f64 / denom as f64
        }
    };
    if n_classes == 2 {
        return f1(1);
    }
    let present: Vec<usize> = (0..n_classes)
        .filter(|&c| tp[c] + fp[c] + fn_[c] > 0)
        .collect();
    if present.is_empty() {
        return 1.0;
    }
    present.iter().map(|&c| f1(c)).sum::<f64>() / present.len() as f64
}

struct Scored {
    group: Vec<Option<usize>>,
    pred: Vec<usize>,
}

fn score<C: Classifier + ?Sized>(m: &C, groups: &[RuleGroup], d: &Dataset) -> Scored {
    let both = parallel::map_range(d.len(), |i| {
        let v = &d.row(i).values;
        (covering_group(groups, v), m.predict_values(v))
    });
    let (group, pred) = both.into_iter().unzip();
    Scored { group, pred }
}

fn agreement(groups: &[RuleGroup], g: usize, preds: impl Iterator<Item = usize>) -> (usize, Option<f64>) {
    let dist = groups[g].distribution();
    let (mut n, mut sum) = (0usize, 0.0);
    for p in preds {
        n += 1;
        sum += dist.prob(p);
    }
    (n, (n > 0).then(|| sum / n as f64))
}

fn aggregate(per_rule: &[RuleAgreement]) -> Option<f64> {
    let n: usize = per_rule.iter().filter(|r| r.agreement.is_some()).map(|r| r.covered).sum();
    if n == 0 {
        return None;
    }
    let s: f64 = per_rule
        .iter()
        .filter_map(|r| r.agreement.map(|a| a * r.covered as f64))
        .sum();
    Some(s / n as f64)
}

fn per_rule_from(groups: &[RuleGroup], s: &Scored) -> Vec<RuleAgreement> {
    (0..groups.len())
        .map(|g| {
            let preds = s.group.iter().zip(&s.pred).filter(|(c, _)| **c == Some(g)).map(|(_, p)| *p);
            let (covered, agreement) = agreement(groups, g, preds);
            RuleAgreement {
                rule_id: groups[g].id.clone(),
                covered,
                agreement,
                from_candidate: false,
            }
        })
        .collect()
}

fn outside_from(d: &Dataset, s: &Scored) -> (usize, Option<f64>) {
    let (truth, pred): (Vec<usize>, Vec<usize>) = (0..d.len())
        .filter(|&i| s.group[i].is_none())
        .map(|i| (d.row(i).label, s.pred[i]))
        .unzip();
    let f1 = (!truth.is_empty()).then(|| f1_score(&truth, &pred, d.schema().n_classes()));
    (truth.len(), f1)
}

/// Per-rule and aggregate agreement on `d`. With a probabilistic rule the
/// agreement of a row is the probability the rule gives the predicted class.
pub fn mra<C: Classifier + ?Sized>(m: &C, groups: &[RuleGroup], d: &Dataset) -> (Vec<RuleAgreement>, Option<f64>) {
    let s = score(m, groups, d);
    let per_rule = per_rule_from(groups, &s);
    let agg = aggregate(&per_rule);
    (per_rule, agg)
}

/// F1 on the rows of `d` no rule covers, against their stored labels.
pub fn outside_f1<C: Classifier + ?Sized>(m: &C, groups: &[RuleGroup], d: &Dataset) -> Option<f64> {
    outside_from(d, &score(m, groups, d)).1
}

fn fixed_half(per_rule: Vec<RuleAgreement>, outside: (usize, Option<f64>), total: usize) -> ObjectiveReport {
    let mra = aggregate(&per_rule);
    let j_value = 0.5 * (1.0 - mra.unwrap_or(0.0)) + 0.5 * (1.0 - outside.1.unwrap_or(0.0));
    ObjectiveReport {
        per_rule,
        mra,
        outside_f1: outside.1,
        outside_rows: outside.0,
        total_rows: total,
        j_value,
        weighting: Weighting::FixedHalf,
    }
}

/// `0.5 (1 - MRA) + 0.5 (1 - F1)` on `d`. An undefined term counts as 0
/// agreement or 0 F1.
pub fn j_train<C: Classifier + ?Sized>(m: &C, groups: &[RuleGroup], d: &Dataset) -> ObjectiveReport {
    let s = score(m, groups, d);
    fixed_half(per_rule_from(groups, &s), outside_from(d, &s), d.len())
}

/// [`j_train`] of a candidate model on the active dataset `d`, except that a
/// rule with no rows in `d` is judged on the candidate's own synthetic rows
/// for that rule (`batch`), so a rule without any coverage can still be
/// learned.
pub fn j_train_candidate<C: Classifier + ?Sized>(
    m: &C,
    groups: &[RuleGroup],
    d: &Dataset,
    batch: &Dataset,
) -> ObjectiveReport {
    let s = score(m, groups, d);
    let mut per_rule = per_rule_from(groups, &s);
    if per_rule.iter().any(|r| r.agreement.is_none()) && !batch.is_empty() {
        let b = score(m, groups, batch);
        for (g, r) in per_rule.iter_mut().enumerate() {
            if r.agreement.is_some() {
                continue;
            }
            let preds = b.group.iter().zip(&b.pred).filter(|(c, _)| **c == Some(g)).map(|(_, p)| *p);
            let (covered, agreement) = agreement(groups, g, preds);
            if covered > 0 {
                *r = RuleAgreement {
                    rule_id: r.rule_id.clone(),
                    covered,
                    agreement,
                    from_candidate: true,
                };
            }
        }
    }
    fixed_half(per_rule, outside_from(d, &s), d.len())
}

/// `Σ_r P(cov_r) MRA_r + P(outside) F1` on a held-out set; 1 is best.
pub fn j_bar_test<C: Classifier + ?Sized>(
    m: &C,
    groups: &[RuleGroup],
    test: &Dataset,
) -> Result<ObjectiveReport, ObjectiveError> {
    if test.is_empty() {
        return Err(ObjectiveError::EmptyTestSet);
    }
    let s = score(m, groups, test);
    let per_rule = per_rule_from(groups, &s);
    let outside = outside_from(test, &s);
    let n = test.len() as f64;
    let mut j = outside.1.unwrap_or(0.0) * outside.0 as f64 / n;
    for r in &per_rule {
        j += r.agreement.unwrap_or(0.0) * r.covered as f64 / n;
    }
    Ok(ObjectiveReport {
        mra: aggregate(&per_rule),
        per_rule,
        outside_f1: outside.1,
        outside_rows: outside.0,
        total_rows: test.len(),
        j_value: j,
        weighting: Weighting::Coverage,
    })
}
