//! Feedback-rule driven editing of tabular classifiers.
//!
//! Given a training set and a set of user feedback rules (`IF <conditions> THEN
//! class = ...`), the crate pre-processes the data so that a model retrained on
//! it agrees with the rules while keeping its behaviour outside the rules'
//! coverage. The pipeline is:
//!
//! 1. [`data`] loads typed tabular data and applies the optional relabel/drop
//!    pre-treatment of rule-covered rows.
//! 2. [`rules`] parses the rule language and makes the rule set conflict-free.
//! 3. [`engine`] runs the accept/reject augmentation loop, drawing on
//!    [`relaxation`] (base populations), [`selection`] (which base rows to
//!    use), [`generation`] (rule-constrained SMOTE-NC style synthesis),
//!    [`models`] (the black-box learners) and [`objective`] (the scores).
//! 4. [`harness`] reproduces the experimental protocol end to end.
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is on
//! (the default); results are identical with the feature disabled.

pub mod data;
pub mod engine;
pub mod generation;
pub mod harness;
pub mod models;
pub mod objective;
pub mod parallel;
pub mod relaxation;
pub mod rules;
pub mod seed;
pub mod selection;

pub use data::{
    Attribute, AttributeKind, DataError, Dataset, Instance, ModificationStrategy, Provenance,
    Schema, Value,
};
pub use engine::{AugmentationResult, EngineError, FroteConfig, IterationTrace, SelectorKind};
pub use models::{Classifier, Model, ModelError, Trainer, TrainerSpec};
pub use objective::ObjectiveReport;
pub use rules::{
    Clause, ConflictPolicy, FeedbackRule, FeedbackRuleSet, LabelDistribution, Op, Predicate,
    RuleError, RuleGroup,
};
