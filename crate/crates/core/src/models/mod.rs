//! The black-box learner contract and three built-in learners.
//!
//! The engine only ever calls [`Trainer::fit`] and [`Classifier::predict_values`],
//! so any learner implementing those two traits can be plugged in.

pub mod encode;
pub mod logistic;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance, Schema, Value};
use crate::parallel;
use crate::seed;

use encode::{Encoder, Standardizer};
use logistic::LogisticModel;
use tree::{DecisionTree, TreeParams};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("instance does not match the model's schema: {0}")]
    SchemaMismatch(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("model file {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Anything that maps attribute vectors to class indices.
pub trait Classifier: Send + Sync {
    /// Predicts for a schema-conforming attribute vector.
    fn predict_values(&self, values: &[Value]) -> usize;
}

/// A training algorithm: dataset in, classifier out.
pub trait Trainer: Sync {
    type Model: Classifier;

    fn fit(&self, d: &Dataset, seed: u64) -> Result<Self::Model, ModelError>;
}

/// Built-in learner choice and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainerSpec {
    LogisticRegression {
        #[serde(default = "defaults::lr_iterations")]
        iterations: usize,
        #[serde(default = "defaults::lr_rate")]
        learning_rate: f64,
        #[serde(default = "defaults::lr_l2")]
        l2: f64,
    },
    RandomForestLite {
        #[serde(default = "defaults::forest_trees")]
        trees: usize,
        #[serde(default = "defaults::forest_depth")]
        max_depth: usize,
        #[serde(default = "defaults::bag_fraction")]
        bag_fraction: f64,
    },
    DecisionTree {
        #[serde(default = "defaults::tree_depth")]
        max_depth: usize,
    },
}

mod defaults {
    pub fn lr_iterations() -> usize {
        500
    }
    pub fn lr_rate() -> f64 {
        1.0
    }
    pub fn lr_l2() -> f64 {
        1e-4
    }
    pub fn forest_trees() -> usize {
        25
    }
    pub fn forest_depth() -> usize {
        3
    }
    pub fn bag_fraction() -> f64 {
        1.0
    }
    pub fn tree_depth() -> usize {
        5
    }
}

impl TrainerSpec {
    /// Logistic regression with 500 iterations.
    pub fn logistic() -> Self {
        TrainerSpec::LogisticRegression {
            iterations: defaults::lr_iterations(),
            learning_rate: defaults::lr_rate(),
            l2: defaults::lr_l2(),
        }
    }

    /// 25 bootstrapped depth-3 trees.
    pub fn forest() -> Self {
        TrainerSpec::RandomForestLite {
            trees: defaults::forest_trees(),
            max_depth: defaults::forest_depth(),
            bag_fraction: defaults::bag_fraction(),
        }
    }

    pub fn tree(max_depth: usize) -> Self {
        TrainerSpec::DecisionTree { max_depth }
    }

    /// Parses the short CLI names `logreg`, `forest` and `tree`.
    pub fn from_short_name(name: &str) -> Option<Self> {
        match name {
            "logreg" => Some(Self::logistic()),
            "forest" => Some(Self::forest()),
            "tree" => Some(Self::tree(defaults::tree_depth())),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparameter(m.into()));
        match *self {
            TrainerSpec::LogisticRegression {
                iterations,
                learning_rate,
                l2,
            } => {
                if iterations == 0 {
                    return bad("iterations must be positive");
                }
                if !(learning_rate > 0.0 && learning_rate.is_finite()) {
                    return bad("learning_rate must be positive");
                }
                if !(l2 >= 0.0 && l2.is_finite()) {
                    return bad("l2 must be non-negative");
                }
            }
            TrainerSpec::RandomForestLite {
                trees,
                max_depth,
                bag_fraction,
            } => {
                if trees == 0 || max_depth == 0 {
                    return bad("trees and max_depth must be positive");
                }
                if !(bag_fraction > 0.0 && bag_fraction <= 1.0) {
                    return bad("bag_fraction must lie in (0, 1]");
                }
            }
            TrainerSpec::DecisionTree { max_depth } => {
                if max_depth == 0 {
                    return bad("max_depth must be positive");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

impl Forest {
    /// Argmax of the summed leaf distributions; ties go to the lower class.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (v, p) in votes.iter_mut().zip(t.predict_distribution(row)) {
                *v += p;
            }
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] + 1e-12 {
                best = c;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Fitted {
    Constant(usize),
    Logistic {
        standardizer: Standardizer,
        model: LogisticModel,
    },
    Tree(DecisionTree),
    Forest(Forest),
}

/// A fitted built-in model, bound to its schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub fingerprint: u64,
    pub n_attributes: usize,
    pub encoder: Encoder,
    pub fitted: Fitted,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Model,
}

const MODEL_FORMAT: &str = "ruleaug-model";
const MODEL_VERSION: u32 = 1;

impl Model {
    /// Predicts a class index after checking the instance against `schema`.
    pub fn predict(&self, schema: &Schema, values: &[Value]) -> Result<usize, ModelError> {
        if schema.fingerprint() != self.fingerprint {
            return Err(ModelError::SchemaMismatch("schema fingerprint differs".into()));
        }
        schema.check_values(values).map_err(ModelError::SchemaMismatch)?;
        Ok(self.predict_values(values))
    }

    pub fn predict_instance(&self, schema: &Schema, x: &Instance) -> Result<usize, ModelError> {
        self.predict(schema, &x.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()).map_err(|source| ModelError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_owned(),
            source,
        })?;
        Model::from_json(&text)
    }
}

impl Classifier for Model {
    fn predict_values(&self, values: &[Value]) -> usize {
        match &self.fitted {
            Fitted::Constant(c) => *c,
            Fitted::Logistic {
                standardizer,
                model,
            } => {
                let mut row = self.encoder.encode(values);
                standardizer.apply(&mut row);
                model.predict(&row)
            }
            Fitted::Tree(t) => t.predict(&self.encoder.encode(values)),
            Fitted::Forest(f) => f.predict(&self.encoder.encode(values)),
        }
    }
}

impl Trainer for TrainerSpec {
    type Model = Model;

    fn fit(&self, d: &Dataset, seed: u64) -> Result<Model, ModelError> {
        self.validate()?;
        if d.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let schema = d.schema();
        let encoder = Encoder::new(schema);
        let n_classes = schema.n_classes();
        let y: Vec<usize> = d.rows().iter().map(|r| r.label).collect();
        let model = |fitted| Model {
            fingerprint: schema.fingerprint(),
            n_attributes: schema.attributes.len(),
            encoder: encoder.clone(),
            fitted,
        };
        if y.iter().all(|&c| c == y[0]) {
            return Ok(model(Fitted::Constant(y[0])));
        }
        let mut x: Vec<Vec<f64>> = d.rows().iter().map(|r| encoder.encode(&r.values)).collect();
        let fitted = match *self {
            TrainerSpec::LogisticRegression {
                iterations,
                learning_rate,
                l2,
            } => {
                let standardizer = Standardizer::fit(&encoder, &x);
                for row in &mut x {
                    standardizer.apply(row);
                }
                let model = LogisticModel::fit(&x, &y, n_classes, iterations, learning_rate, l2);
                Fitted::Logistic {
                    standardizer,
                    model,
                }
            }
            TrainerSpec::DecisionTree { max_depth } => {
                let params = TreeParams {
                    max_depth,
                    max_features: None,
                    min_samples_split: 2,
                };
                let mut rng = seed::stream(seed, "tree", 0);
                Fitted::Tree(DecisionTree::fit(&x, &y, n_classes, &params, &mut rng))
            }
            TrainerSpec::RandomForestLite {
                trees,
                max_depth,
                bag_fraction,
            } => {
                let width = encoder.width();
                let params = TreeParams {
                    max_depth,
                    max_features: Some(((width as f64).sqrt().ceil() as usize).max(1)),
                    min_samples_split: 2,
                };
                let n = x.len();
                let bag = ((n as f64 * bag_fraction).round() as usize).max(1);
                let trees = parallel::map_range(trees, |t| {
                    use rand::Rng;
                    let mut rng = seed::stream(seed, "forest", t as u64);
                    let sample: Vec<usize> = (0..bag).map(|_| rng.gen_range(0..n)).collect();
                    let bx: Vec<Vec<f64>> = sample.iter().map(|&i| x[i].clone()).collect();
                    let by: Vec<usize> = sample.iter().map(|&i| y[i]).collect();
                    DecisionTree::fit(&bx, &by, n_classes, &params, &mut rng)
                });
                Fitted::Forest(Forest { trees, n_classes })
            }
        };
        Ok(model(fitted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;
    use rand::Rng;
    use std::sync::Arc;

    fn blobs(seed_: u64) -> Dataset {
        let schema = Arc::new(
            Schema::new(
                vec![
                    Attribute::numeric("x"),
                    Attribute::numeric("y"),
                    Attribute::categorical("c", ["u", "v"]),
                ],
                "label",
                vec!["neg".into(), "pos".into()],
            )
            .unwrap(),
        );
        let mut rng = seed::stream(seed_, "blobs", 0);
        let rows = (0..200)
            .map(|i| {
                let label = i % 2;
                let centre = if label == 0 { -2.0 } else { 2.0 };
                Instance {
                    values: vec![
                        Value::Num(centre + rng.gen_range(-1.0..1.0)),
                        Value::Num(centre + rng.gen_range(-1.0..1.0)),
                        Value::Cat(rng.gen_range(0..2)),
                    ],
                    label,
                }
            })
            .collect();
        Dataset::from_rows(schema, rows).unwrap()
    }

    fn accuracy(m: &Model, d: &Dataset) -> f64 {
        let hits = d
            .rows()
            .iter()
            .filter(|r| m.predict_values(&r.values) == r.label)
            .count();
        hits as f64 / d.len() as f64
    }

    #[test]
    fn all_learners_fit_separable_blobs() {
        let d = blobs(1);
        for spec in [TrainerSpec::logistic(), TrainerSpec::forest(), TrainerSpec::tree(3)] {
            let m = spec.fit(&d, 7).unwrap();
            assert!(accuracy(&m, &d) >= 0.95, "{spec:?}");
        }
    }

    #[test]
    fn same_seed_same_predictions() {
        let d = blobs(2);
        let probes = blobs(3);
        for spec in [TrainerSpec::logistic(), TrainerSpec::forest()] {
            let a = spec.fit(&d, 5).unwrap();
            let b = spec.fit(&d, 5).unwrap();
            assert_eq!(a, b);
            for r in probes.rows().iter().take(100) {
                assert_eq!(a.predict_values(&r.values), b.predict_values(&r.values));
            }
        }
    }

    #[test]
    fn single_class_gives_constant() {
        let d = blobs(4);
        let only_pos: Vec<usize> = (0..d.len()).filter(|&i| d.row(i).label == 1).collect();
        let d = d.subset(&only_pos);
        let m = TrainerSpec::logistic().fit(&d, 0).unwrap();
        assert_eq!(m.fitted, Fitted::Constant(1));
        assert_eq!(m.predict_values(&[Value::Num(-100.0), Value::Num(-100.0), Value::Cat(0)]), 1);
    }

    #[test]
    fn empty_and_bad_hyperparameters() {
        let d = blobs(5).subset(&[]);
        assert!(matches!(TrainerSpec::logistic().fit(&d, 0), Err(ModelError::EmptyDataset)));
        let bad = TrainerSpec::RandomForestLite {
            trees: 0,
            max_depth: 3,
            bag_fraction: 1.0,
        };
        assert!(bad.fit(&blobs(5), 0).is_err());
    }

    #[test]
    fn one_tree_forest_matches_its_tree() {
        let d = blobs(6);
        let spec = TrainerSpec::RandomForestLite {
            trees: 1,
            max_depth: 1,
            bag_fraction: 1.0,
        };
        let m = spec.fit(&d, 9).unwrap();
        let Fitted::Forest(f) = &m.fitted else { panic!() };
        for r in d.rows() {
            let row = m.encoder.encode(&r.values);
            assert_eq!(f.predict(&row), f.trees[0].predict(&row));
        }
    }

    #[test]
    fn predict_checks_schema_and_json_round_trips() {
        let d = blobs(7);
        let m = TrainerSpec::forest().fit(&d, 1).unwrap();
        assert!(m.predict(d.schema(), &[Value::Num(0.0)]).is_err());
        assert!(m.predict(d.schema(), &d.row(0).values).is_ok());
        let back = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(Model::from_json("{\"format\":\"x\",\"version\":1}").is_err());
    }

    #[test]
    fn trainer_spec_json() {
        let spec: TrainerSpec = serde_json::from_str(r#"{"kind":"logistic_regression"}"#).unwrap();
        assert_eq!(spec, TrainerSpec::logistic());
        let spec: TrainerSpec =
            serde_json::from_str(r#"{"kind":"random_forest_lite","trees":3}"#).unwrap();
        assert!(matches!(spec, TrainerSpec::RandomForestLite { trees: 3, max_depth: 3, .. }));
    }
}
