//! Multi-run experiments: draw a rule set, split, augment, evaluate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, split_with_tcf, DataError, Dataset};
use crate::engine::{run_frote, EngineError, FroteConfig, IterationTrace, StopReason};
use crate::harness::benchmark::{loans, quarter_plane, two_blobs, BlobsConfig};
use crate::harness::extract::{extract_seed_rules, ExtractError};
use crate::harness::perturb::perturb_rules;
use crate::models::{Classifier, TrainerSpec};
use crate::objective::{j_bar_test, ObjectiveError};
use crate::parallel;
use crate::rules::{parse_rule_set, render_rule, FeedbackRule, FeedbackRuleSet, RuleGroup};
use crate::seed;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("rules file {path}: {source}")]
    Rules {
        path: PathBuf,
        #[source]
        source: crate::rules::ParseError,
    },
    #[error("rules file {path}: {source}")]
    RulesIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("no conflict-free rule set of size {requested} found in a pool of {pool_size} rules")]
    NoConflictFreeSet { requested: usize, pool_size: usize },
    #[error("run {run}: {source}")]
    Engine {
        run: usize,
        #[source]
        source: EngineError,
    },
    #[error("run {run}: {source}")]
    Objective {
        run: usize,
        #[source]
        source: ObjectiveError,
    },
}

/// Where the experiment's dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { csv: PathBuf, schema: PathBuf },
    /// Two blobs; without a rules file the quarter-plane rule is used.
    Blobs(BlobsConfig),
    Loans { n: usize },
}

/// Attempts to assemble one conflict-free rule set from the pool.
pub const DRAW_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Fixed rules used in every run; otherwise rule sets are drawn from a
    /// perturbed pool.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default = "TrainerSpec::logistic")]
    pub trainer: TrainerSpec,
    #[serde(default = "defaults::frs_size")]
    pub frs_size: usize,
    #[serde(default)]
    pub tcf: f64,
    #[serde(default = "defaults::outside_train_frac")]
    pub outside_train_frac: f64,
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    #[serde(default = "defaults::coverage_bounds")]
    pub coverage_bounds: (f64, f64),
    #[serde(default = "defaults::pool_size")]
    pub pool_size: usize,
    #[serde(default = "defaults::seed_rule_depth")]
    pub seed_rule_depth: usize,
    #[serde(default)]
    pub frote: FroteConfig,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn frs_size() -> usize {
        1
    }
    pub fn outside_train_frac() -> f64 {
        0.8
    }
    pub fn runs() -> usize {
        10
    }
    pub fn coverage_bounds() -> (f64, f64) {
        (0.05, 0.25)
    }
    pub fn pool_size() -> usize {
        20
    }
    pub fn seed_rule_depth() -> usize {
        3
    }
}

impl ExperimentConfig {
    /// A config for the two-blob benchmark with its quarter-plane rule.
    pub fn blobs(blobs: BlobsConfig) -> Self {
        ExperimentConfig {
            data: DataSource::Blobs(blobs),
            rules: None,
            trainer: TrainerSpec::logistic(),
            frs_size: 1,
            tcf: 0.0,
            outside_train_frac: defaults::outside_train_frac(),
            runs: defaults::runs(),
            coverage_bounds: defaults::coverage_bounds(),
            pool_size: defaults::pool_size(),
            seed_rule_depth: defaults::seed_rule_depth(),
            frote: FroteConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        let (lo, hi) = self.coverage_bounds;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad("coverage bounds must satisfy 0 <= lo < hi <= 1");
        }
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.tcf) {
            return bad("tcf must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.outside_train_frac) {
            return bad("outside_train_frac must lie in [0, 1]");
        }
        if self.frs_size == 0 {
            return bad("frs_size must be at least 1");
        }
        self.trainer
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.frote
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { csv, schema } = &mut self.data {
            fix(csv);
            fix(schema);
        }
        if let Some(r) = &mut self.rules {
            fix(r);
        }
    }
}

/// Test-set metrics of one model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub mra: Option<f64>,
    pub f1: Option<f64>,
    pub j_bar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunEntry {
    pub run: usize,
    pub seed: u64,
    pub rules: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    pub initial: Metrics,
    pub modified: Metrics,
    #[serde(rename = "final")]
    pub final_: Metrics,
    /// Final minus initial J̄.
    pub delta_j_bar: f64,
    /// Final minus modified J̄.
    pub delta_j_bar_vs_modified: f64,
    pub instances_added: usize,
    /// Instances added over the training-set size.
    pub added_fraction: f64,
    pub iterations: usize,
    pub accepted_iterations: usize,
    pub eta: usize,
    pub stop: StopReason,
    /// Synthetic rows that do not satisfy the rule they were generated for.
    pub synthetic_violations: usize,
    pub trace: Vec<IterationTrace>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// Mean and sample standard deviation; `std` is 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            mean,
            std: var.sqrt(),
            n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset_size: usize,
    pub pool_size: usize,
    pub pool_warning: Option<String>,
    pub runs: Vec<RunEntry>,
    pub aggregate: BTreeMap<String, Summary>,
}

/// Per-metric mean and standard deviation over the runs that define it.
pub fn aggregate(runs: &[RunEntry]) -> BTreeMap<String, Summary> {
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut put = |k: &str, v: Option<f64>| {
        let col = cols.entry(k.to_string()).or_default();
        if let Some(v) = v {
            col.push(v);
        }
    };
    for r in runs {
        for (stage, m) in [("initial", r.initial), ("modified", r.modified), ("final", r.final_)] {
            put(&format!("{stage}.mra"), m.mra);
            put(&format!("{stage}.f1"), m.f1);
            put(&format!("{stage}.j_bar"), Some(m.j_bar));
        }
        put("delta_j_bar", Some(r.delta_j_bar));
        put("delta_j_bar_vs_modified", Some(r.delta_j_bar_vs_modified));
        put("instances_added", Some(r.instances_added as f64));
        put("added_fraction", Some(r.added_fraction));
        put("iterations", Some(r.iterations as f64));
        put("accepted_iterations", Some(r.accepted_iterations as f64));
    }
    cols.into_iter().map(|(k, v)| (k, Summary::of(&v))).collect()
}

/// Test-set metrics of `m` for the given rule groups.
pub fn evaluate<C: Classifier + ?Sized>(m: &C, groups: &[RuleGroup], test: &Dataset) -> Result<Metrics, ObjectiveError> {
    let r = j_bar_test(m, groups, test)?;
    Ok(Metrics {
        mra: r.mra,
        f1: r.outside_f1,
        j_bar: r.j_value,
    })
}

/// Synthetic rows of `d` not covered by the group named in their provenance.
pub fn synthetic_violations(d: &Dataset, groups: &[RuleGroup]) -> usize {
    d.rows()
        .iter()
        .zip(d.provenance())
        .filter(|(row, p)| match p {
            crate::data::Provenance::Synthetic { rule_id, .. } => !groups
                .iter()
                .find(|g| &g.id == rule_id)
                .is_some_and(|g| g.covers(&row.values)),
            crate::data::Provenance::Original => false,
        })
        .count()
}

/// Everything a run needs besides its seed.
pub struct Prepared {
    pub dataset: Dataset,
    /// Fixed rule set, or `None` when drawing from the pool.
    pub fixed: Option<FeedbackRuleSet>,
    pub pool: Vec<FeedbackRule>,
    pub pool_warning: Option<String>,
}

fn read_rules(path: &Path, d: &Dataset) -> Result<FeedbackRuleSet, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::RulesIo {
        path: path.to_owned(),
        source,
    })?;
    parse_rule_set(&text, d.schema()).map_err(|source| HarnessError::Rules {
        path: path.to_owned(),
        source,
    })
}

/// Loads or generates the dataset and the rules for an experiment.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    cfg.validate()?;
    let (dataset, bundled) = match &cfg.data {
        DataSource::Csv { csv, schema } => (load_dataset(csv, schema)?, None),
        DataSource::Blobs(b) => {
            if cfg.rules.is_some() {
                (two_blobs(b, cfg.seed), None)
            } else {
                let (d, frs) = quarter_plane(b, cfg.seed);
                (d, Some(frs))
            }
        }
        DataSource::Loans { n } => (loans(*n, cfg.seed), None),
    };
    if dataset.is_empty() {
        return Err(HarnessError::Config("dataset is empty".into()));
    }
    let fixed = match &cfg.rules {
        Some(path) => Some(read_rules(path, &dataset)?),
        None => bundled,
    };
    let (pool, pool_warning) = if fixed.is_some() {
        (Vec::new(), None)
    } else {
        let seeds = extract_seed_rules(&dataset, cfg.seed_rule_depth, seed::derive(cfg.seed, "seed-rules", 0))?;
        let out = perturb_rules(
            &seeds,
            &dataset,
            cfg.pool_size,
            cfg.coverage_bounds,
            &mut seed::stream(cfg.seed, "pool", 0),
        );
        (out.pool, out.warning)
    };
    Ok(Prepared {
        dataset,
        fixed,
        pool,
        pool_warning,
    })
}

/// Draws `size` distinct pool rules with no pairwise conflict.
pub fn draw_rule_set(
    pool: &[FeedbackRule],
    size: usize,
    d: &Dataset,
    rng: &mut seed::Rng,
) -> Result<FeedbackRuleSet, HarnessError> {
    let fail = || HarnessError::NoConflictFreeSet {
        requested: size,
        pool_size: pool.len(),
    };
    if pool.len() < size {
        return Err(fail());
    }
    for _ in 0..DRAW_ATTEMPTS {
        let rules: Vec<FeedbackRule> = pool.choose_multiple(rng, size).cloned().collect();
        let frs = FeedbackRuleSet::new(rules);
        if frs.detect_conflicts(d.schema()).is_empty() {
            return Ok(frs);
        }
    }
    Err(fail())
}

/// One run: draw rules, split, augment the training part and evaluate the
/// initial, modified and final models on the held-out part.
pub fn run_once(cfg: &ExperimentConfig, prepared: &Prepared, run: usize) -> Result<RunEntry, HarnessError> {
    let run_seed = seed::derive(cfg.seed, "run", run as u64);
    let d = &prepared.dataset;
    let frs = match &prepared.fixed {
        Some(f) => f.clone(),
        None => draw_rule_set(&prepared.pool, cfg.frs_size, d, &mut seed::stream(run_seed, "draw", 0))?,
    };
    let (train, test) = split_with_tcf(
        d,
        &frs,
        cfg.tcf,
        cfg.outside_train_frac,
        &mut seed::stream(run_seed, "split", 0),
    );
    if train.is_empty() {
        return Err(HarnessError::Config(format!("run {run}: training split is empty")));
    }
    let frote = FroteConfig {
        seed: run_seed,
        ..cfg.frote.clone()
    };
    let result = run_frote(&frote, &train, &frs, &cfg.trainer).map_err(|source| HarnessError::Engine { run, source })?;
    let groups = frs.merge_overlapping(d.schema());
    let eval = |m: &crate::models::Model| evaluate(m, &groups, &test).map_err(|source| HarnessError::Objective { run, source });
    let initial = eval(&result.initial_model)?;
    let modified = eval(&result.modified_model)?;
    let final_ = eval(&result.model)?;
    Ok(RunEntry {
        run,
        seed: run_seed,
        rules: frs.rules.iter().map(|r| render_rule(r, d.schema())).collect(),
        train_size: train.len(),
        test_size: test.len(),
        initial,
        modified,
        final_,
        delta_j_bar: final_.j_bar - initial.j_bar,
        delta_j_bar_vs_modified: final_.j_bar - modified.j_bar,
        instances_added: result.added,
        added_fraction: result.added as f64 / train.len() as f64,
        iterations: result.traces.len(),
        accepted_iterations: result.accepted_iterations(),
        eta: result.eta,
        stop: result.stop,
        synthetic_violations: synthetic_violations(&result.dataset, &groups),
        trace: result.traces,
    })
}

/// Runs every configured run (in parallel when enabled) and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let prepared = prepare(cfg)?;
    let runs = parallel::map_range(cfg.runs, |r| run_once(cfg, &prepared, r))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunReport {
        config: cfg.clone(),
        dataset_size: prepared.dataset.len(),
        pool_size: prepared.pool.len(),
        pool_warning: prepared.pool_warning,
        aggregate: aggregate(&runs),
        runs,
    })
}
