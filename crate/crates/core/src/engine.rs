//! The accept/reject augmentation loop.
//!
//! Each iteration selects base rows, generates a batch of rule-satisfying
//! synthetic rows, retrains on the grown dataset and keeps the batch only if
//! the training loss strictly drops.

use serde::{Deserialize, Serialize};

use crate::data::{apply_modification, DataError, Dataset, ModificationStrategy, Provenance};
use crate::generation::{generate, GenerationError};
use crate::models::{ModelError, Trainer};
use crate::objective::{j_train, j_train_candidate, ObjectiveReport};
use crate::relaxation::{pre_select_bp, BasePopulation};
use crate::rules::domain::rule_satisfiable;
use crate::rules::{FeedbackRuleSet, RuleGroup};
use crate::seed;
use crate::selection::{compute_weights, select_ip, select_random, InstanceWeights};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input dataset is empty")]
    EmptyDataset,
    #[error("rule set has conflicting rules: {0:?}")]
    Conflicts(Vec<(String, String)>),
    #[error("rule {0} can never be satisfied")]
    Unsatisfiable(String),
    #[error("modification strategy: {0}")]
    Modification(#[from] DataError),
    #[error("training failed at iteration {iteration}: {source}")]
    Training {
        iteration: usize,
        #[source]
        source: ModelError,
    },
    #[error("generation failed at iteration {iteration}: {source}")]
    Generation {
        iteration: usize,
        #[source]
        source: GenerationError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Random,
    Ip,
}

impl std::str::FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SelectorKind::Random),
            "ip" => Ok(SelectorKind::Ip),
            _ => Err(format!("unknown selector `{s}` (expected random or ip)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FroteConfig {
    /// Iteration limit.
    pub tau: usize,
    /// Oversampling fraction: at most about `q |D|` rows are added.
    pub q: f64,
    /// Neighbours used for interpolation.
    pub k: usize,
    pub eta_override: Option<usize>,
    pub selector: SelectorKind,
    pub strategy: ModificationStrategy,
    pub seed: u64,
    /// Neighbourhood size for the borderline weights of the IP selector.
    pub weight_neighbors: usize,
}

impl Default for FroteConfig {
    fn default() -> Self {
        FroteConfig {
            tau: 200,
            q: 0.5,
            k: 5,
            eta_override: None,
            selector: SelectorKind::Random,
            strategy: ModificationStrategy::None,
            seed: 0,
            weight_neighbors: 10,
        }
    }
}

impl FroteConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.tau == 0 {
            return Err(EngineError::Config("tau must be at least 1".into()));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(EngineError::Config("q must be positive".into()));
        }
        if self.k == 0 {
            return Err(EngineError::Config("k must be at least 1".into()));
        }
        if self.eta_override == Some(0) {
            return Err(EngineError::Config("eta must be at least 1".into()));
        }
        Ok(())
    }

    /// Rows generated per iteration: `ceil(q n / tau)`, at least 1.
    pub fn eta(&self, n: usize) -> usize {
        self.eta_override
            .unwrap_or_else(|| ((self.q * n as f64 / self.tau as f64).ceil() as usize).max(1))
    }

    pub fn quota(&self, n: usize) -> f64 {
        self.q * n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationTrace {
    /// 1-based.
    pub iteration: usize,
    /// Rows added before this iteration; at most the quota when the loop
    /// condition was checked.
    pub n_before: usize,
    pub selected: usize,
    pub generated: usize,
    /// Selected bases that produced no instance.
    pub skipped: usize,
    pub accepted: bool,
    pub j_before: f64,
    pub j_after: f64,
    /// Rows added after this iteration.
    pub cumulative: usize,
    /// Rows by which the cumulative count exceeds the quota.
    pub overshoot: f64,
    pub relaxed_rules: usize,
    pub selection_repaired: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterationLimit,
    QuotaReached,
    NoBasePopulation,
}

#[derive(Clone, Debug)]
pub struct AugmentationResult<M> {
    /// Input after the modification strategy plus all accepted batches.
    pub dataset: Dataset,
    pub initial_model: M,
    /// Trained on the modified input; equal in role to the initial model
    /// when the strategy is `none`.
    pub modified_model: M,
    pub model: M,
    pub traces: Vec<IterationTrace>,
    pub initial: ObjectiveReport,
    pub modified: ObjectiveReport,
    pub final_report: ObjectiveReport,
    pub eta: usize,
    pub quota: f64,
    pub added: usize,
    pub stop: StopReason,
    pub modified_len: usize,
}

impl<M> AugmentationResult<M> {
    pub fn accepted_iterations(&self) -> usize {
        self.traces.iter().filter(|t| t.accepted).count()
    }
}

/// Checks the rule set, merges overlapping rules and returns the groups the
/// loop works on.
pub fn prepare_groups(d: &Dataset, frs: &FeedbackRuleSet) -> Result<Vec<RuleGroup>, EngineError> {
    let schema = d.schema();
    let conflicts = frs.detect_conflicts(schema);
    if !conflicts.is_empty() {
        return Err(EngineError::Conflicts(conflicts));
    }
    if let Some(r) = frs.rules.iter().find(|r| !rule_satisfiable(schema, r)) {
        return Err(EngineError::Unsatisfiable(r.id.clone()));
    }
    Ok(frs.merge_overlapping(schema))
}

fn batch_dataset(d: &Dataset, out: &crate::generation::GenerationOutcome) -> Dataset {
    let mut s = Dataset::new(d.schema_arc().clone());
    for g in &out.instances {
        s.push(
            crate::data::Instance {
                values: g.values.clone(),
                label: g.label,
            },
            Provenance::Synthetic {
                rule_id: g.rule_id.clone(),
                base: g.base,
                neighbor: g.neighbor,
            },
        )
        .expect("generated rows conform to the schema");
    }
    s
}

/// Runs the augmentation loop on `d` with `trainer` as the black-box learner.
pub fn run_frote<T: Trainer>(
    cfg: &FroteConfig,
    d: &Dataset,
    frs: &FeedbackRuleSet,
    trainer: &T,
) -> Result<AugmentationResult<T::Model>, EngineError>
where
    T::Model: Clone,
{
    cfg.validate()?;
    if d.is_empty() {
        return Err(EngineError::EmptyDataset);
    }
    let groups = prepare_groups(d, frs)?;
    let train_seed = seed::derive(cfg.seed, "train", 0);
    let fit = |data: &Dataset, iteration: usize| {
        trainer
            .fit(data, train_seed)
            .map_err(|source| EngineError::Training { iteration, source })
    };

    let initial_model = fit(d, 0)?;
    let initial = j_train(&initial_model, &groups, d);
    let mut modify_rng = seed::stream(cfg.seed, "modify", 0);
    let mut active = apply_modification(d, frs, cfg.strategy, Some(&mut modify_rng))?;
    let modified_model = if cfg.strategy == ModificationStrategy::None {
        initial_model.clone()
    } else {
        fit(&active, 0)?
    };
    let modified = j_train(&modified_model, &groups, &active);
    let modified_len = active.len();

    let eta = cfg.eta(d.len());
    let quota = cfg.quota(d.len());
    let mut model = modified_model.clone();
    let mut j_hat = modified.j_value;
    let mut bps = pre_select_bp(&active, &groups, cfg.k);
    let mut weights: Option<InstanceWeights> = None;
    let mut traces = Vec::new();
    let mut added = 0usize;
    let mut iteration = 0usize;
    let mut final_report = modified.clone();

    let stop = loop {
        if iteration >= cfg.tau {
            break StopReason::IterationLimit;
        }
        if added as f64 > quota {
            break StopReason::QuotaReached;
        }
        if bps.iter().all(BasePopulation::is_empty) {
            break StopReason::NoBasePopulation;
        }
        iteration += 1;
        let plan = match cfg.selector {
            SelectorKind::Random => {
                select_random(&bps, eta, &mut seed::stream(cfg.seed, "select", iteration as u64))
            }
            SelectorKind::Ip => {
                let w = weights.get_or_insert_with(|| compute_weights(&active, &model, cfg.weight_neighbors));
                select_ip(&bps, w, eta, cfg.k)
            }
        };
        let outcome = generate(
            &active,
            &groups,
            &bps,
            &plan,
            cfg.k,
            seed::derive(cfg.seed, "generate", iteration as u64),
        )
        .map_err(|source| EngineError::Generation { iteration, source })?;
        let mut trace = IterationTrace {
            iteration,
            n_before: added,
            selected: plan.total(),
            generated: outcome.instances.len(),
            skipped: outcome.skipped,
            accepted: false,
            j_before: j_hat,
            j_after: j_hat,
            cumulative: added,
            overshoot: 0.0,
            relaxed_rules: bps.iter().filter(|b| b.relaxed).count(),
            selection_repaired: plan.any_repaired(),
        };
        if outcome.instances.is_empty() {
            traces.push(trace);
            continue;
        }
        let batch = batch_dataset(&active, &outcome);
        let mut candidate = active.clone();
        candidate.extend_from(&batch);
        let cand_model = fit(&candidate, iteration)?;
        let report = j_train_candidate(&cand_model, &groups, &active, &batch);
        trace.j_after = report.j_value;
        if report.j_value < j_hat {
            trace.accepted = true;
            added += batch.len();
            trace.cumulative = added;
            trace.overshoot = (added as f64 - quota).max(0.0);
            active = candidate;
            model = cand_model;
            j_hat = report.j_value;
            final_report = report;
            bps = pre_select_bp(&active, &groups, cfg.k);
            weights = None;
        }
        traces.push(trace);
    };

    Ok(AugmentationResult {
        dataset: active,
        initial_model,
        modified_model,
        model,
        traces,
        initial,
        modified,
        final_report,
        eta,
        quota,
        added,
        stop,
        modified_len,
    })
}
