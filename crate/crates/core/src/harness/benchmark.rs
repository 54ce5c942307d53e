//! Bundled synthetic datasets.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Attribute, Dataset, Instance, Schema, Value};
use crate::rules::{parse_rule_set, FeedbackRuleSet};
use crate::seed;

/// Two isotropic Gaussian blobs in the plane. Class `A` sits above class
/// `B`; the bundled rule hands the right half of the `B` blob to `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobsConfig {
    pub n: usize,
    pub center_a: (f64, f64),
    pub center_b: (f64, f64),
    pub std_dev: f64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        BlobsConfig {
            n: 1000,
            center_a: (0.0, 3.0),
            center_b: (0.0, -3.0),
            std_dev: 1.0,
        }
    }
}

pub const QUARTER_PLANE_RULE: &str = "IF x1 > 0 AND x2 < 0 THEN class = A";

pub fn blobs_schema() -> Schema {
    Schema::new(
        vec![Attribute::numeric("x1"), Attribute::numeric("x2")],
        "class",
        vec!["A".into(), "B".into()],
    )
    .expect("static schema is valid")
}

/// Alternating `A`/`B` rows drawn from the two blobs.
pub fn two_blobs(cfg: &BlobsConfig, master: u64) -> Dataset {
    let schema = Arc::new(blobs_schema());
    let noise = Normal::new(0.0, cfg.std_dev).expect("std_dev must be positive and finite");
    let mut rng = seed::stream(master, "blobs", 0);
    let rows = (0..cfg.n)
        .map(|i| {
            let label = i % 2;
            let (cx, cy) = if label == 0 { cfg.center_a } else { cfg.center_b };
            Instance {
                values: vec![
                    Value::Num(cx + noise.sample(&mut rng)),
                    Value::Num(cy + noise.sample(&mut rng)),
                ],
                label,
            }
        })
        .collect();
    Dataset::from_rows(schema, rows).expect("generated rows conform")
}

/// The blobs dataset together with its quarter-plane rule.
pub fn quarter_plane(cfg: &BlobsConfig, master: u64) -> (Dataset, FeedbackRuleSet) {
    let d = two_blobs(cfg, master);
    let frs = parse_rule_set(QUARTER_PLANE_RULE, d.schema()).expect("bundled rule parses");
    (d, frs)
}

pub fn loans_schema() -> Schema {
    Schema::new(
        vec![
            Attribute::numeric("age"),
            Attribute::numeric("income"),
            Attribute::categorical("status", ["single", "married", "divorced"]),
            Attribute::categorical("housing", ["rent", "own", "family"]),
        ],
        "decision",
        vec!["deny".into(), "approve".into()],
    )
    .expect("static schema is valid")
}

/// A small mixed-type loan dataset. Approval grows with age and income,
/// home owners get a bonus, and about 5% of labels are flipped.
pub fn loans(n: usize, master: u64) -> Dataset {
    let schema = Arc::new(loans_schema());
    let mut rng = seed::stream(master, "loans", 0);
    let income_noise = Normal::new(0.0, 12.0).expect("valid");
    let rows = (0..n)
        .map(|_| {
            let age = rng.gen_range(18.0..70.0f64).round();
            let income = (20.0 + 0.8 * (age - 18.0) + income_noise.sample(&mut rng)).max(5.0);
            let status = rng.gen_range(0..3usize);
            let housing = rng.gen_range(0..3usize);
            let score = 0.04 * (age - 40.0) + 0.05 * (income - 45.0) + if housing == 1 { 0.8 } else { 0.0 };
            let mut label = usize::from(score > 0.0);
            if rng.gen_bool(0.05) {
                label = 1 - label;
            }
            Instance {
                values: vec![
                    Value::Num(age),
                    Value::Num((income * 10.0).round() / 10.0),
                    Value::Cat(status),
                    Value::Cat(housing),
                ],
                label,
            }
        })
        .collect();
    Dataset::from_rows(schema, rows).expect("generated rows conform")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_balanced_and_reproducible() {
        let cfg = BlobsConfig::default();
        let a = two_blobs(&cfg, 4);
        assert_eq!(a.len(), 1000);
        assert_eq!(a.rows().iter().filter(|r| r.label == 0).count(), 500);
        assert_eq!(a.rows(), two_blobs(&cfg, 4).rows());
        let (d, frs) = quarter_plane(&cfg, 4);
        let covered = frs.coverage(&d);
        assert!(covered.len() > 150 && covered.len() < 350, "{}", covered.len());
    }

    #[test]
    fn loans_mix_both_labels() {
        let d = loans(300, 1);
        let approve = d.rows().iter().filter(|r| r.label == 1).count();
        assert!(approve > 60 && approve < 240, "{approve}");
    }
}
