//! `ruleaug` command-line front end.
//!
//! Exit codes: 0 on success, 2 when the input is invalid (arguments, data,
//! schema, rules, configuration), 3 when a run fails at runtime.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ruleaug::data::load_dataset;
use ruleaug::engine::{run_frote, EngineError, IterationTrace, StopReason};
use ruleaug::harness::experiment::HarnessError;
use ruleaug::harness::{extract_seed_rules, perturb_rules, run_experiment, ExperimentConfig, RunReport};
use ruleaug::rules::domain::rule_satisfiable;
use ruleaug::rules::{parse_rule_set, render_rule, render_rule_set};
use ruleaug::{
    ConflictPolicy, Dataset, FeedbackRuleSet, FroteConfig, ModificationStrategy, ObjectiveReport, Schema, SelectorKind,
    TrainerSpec,
};

#[derive(Parser)]
#[command(name = "ruleaug", version, about = "Edit tabular classifiers with feedback rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment a training set so a retrained model follows the rules.
    Augment(AugmentArgs),
    /// Run a multi-run experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// Validate, resolve or generate rule sets.
    #[command(subcommand)]
    Rules(RulesCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Logreg,
    Forest,
    Tree,
}

impl ModelKind {
    fn spec(self) -> TrainerSpec {
        match self {
            ModelKind::Logreg => TrainerSpec::logistic(),
            ModelKind::Forest => TrainerSpec::forest(),
            ModelKind::Tree => TrainerSpec::tree(5),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Selector {
    Random,
    Ip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    None,
    Relabel,
    Drop,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, value_enum, default_value = "logreg")]
    model: ModelKind,
    #[arg(long, default_value_t = 200)]
    tau: usize,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Rows per iteration; defaults to ceil(q |D| / tau).
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long, value_enum, default_value = "random")]
    selector: Selector,
    #[arg(long, value_enum, default_value = "none")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Augmented dataset (CSV with a provenance column).
    #[arg(long)]
    out: PathBuf,
    /// Run report (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Also save the final model as JSON.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Parse a rules file and report conflicts and unsatisfiable rules.
    Check {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        /// Also report each rule's coverage on this CSV.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Rewrite a rule set so that no two rules conflict.
    Resolve {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        /// Weight of the first rule on an intersection; without it each rule
        /// simply excludes the other.
        #[arg(long)]
        mixture: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a pool of perturbed rules from tree-extracted seed rules.
    Perturb {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0.05)]
        lo: f64,
        #[arg(long, default_value_t = 0.25)]
        hi: f64,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

trait Classify<T> {
    fn invalid(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Outcome<T> {
        self.map_err(|e| Failure::Validation(e.into()))
    }
    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::Config(_) | EngineError::EmptyDataset | EngineError::Conflicts(_) | EngineError::Unsatisfiable(_) => {
            Failure::Validation(e.into())
        }
        _ => Failure::Runtime(e.into()),
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::Engine { source, run } => match engine_failure(source) {
            Failure::Validation(e) => Failure::Validation(e.context(format!("run {run}"))),
            Failure::Runtime(e) => Failure::Runtime(e.context(format!("run {run}"))),
        },
        HarnessError::Objective { .. } | HarnessError::NoConflictFreeSet { .. } => Failure::Runtime(e.into()),
        _ => Failure::Validation(e.into()),
    }
}

fn read_rules(path: &Path, schema: &Schema) -> Outcome<FeedbackRuleSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .invalid()?;
    parse_rule_set(&text, schema)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
        .invalid()
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value).runtime()?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Serialize)]
struct AugmentEcho {
    data: PathBuf,
    schema: PathBuf,
    rules: PathBuf,
    trainer: TrainerSpec,
    frote: FroteConfig,
}

#[derive(Serialize)]
struct AugmentReport {
    config: AugmentEcho,
    rules: Vec<String>,
    input_rows: usize,
    modified_rows: usize,
    output_rows: usize,
    eta: usize,
    quota: f64,
    stop: StopReason,
    iterations: usize,
    accepted_iterations: usize,
    instances_added: usize,
    initial: ObjectiveReport,
    modified: ObjectiveReport,
    #[serde(rename = "final")]
    final_: ObjectiveReport,
    trace: Vec<IterationTrace>,
    wall_time: f64,
}

fn augment(a: AugmentArgs) -> Outcome<()> {
    let start = Instant::now();
    let d = load_dataset(&a.data, &a.schema).invalid()?;
    let frs = read_rules(&a.rules, d.schema())?;
    let trainer = a.model.spec();
    let frote = FroteConfig {
        tau: a.tau,
        q: a.q,
        k: a.k,
        eta_override: a.eta,
        selector: match a.selector {
            Selector::Random => SelectorKind::Random,
            Selector::Ip => SelectorKind::Ip,
        },
        strategy: match a.strategy {
            Strategy::None => ModificationStrategy::None,
            Strategy::Relabel => ModificationStrategy::Relabel,
            Strategy::Drop => ModificationStrategy::Drop,
        },
        seed: a.seed,
        ..FroteConfig::default()
    };
    let result = run_frote(&frote, &d, &frs, &trainer).map_err(engine_failure)?;
    result.dataset.save_csv(&a.out, true).runtime()?;
    if let Some(path) = &a.save_model {
        result.model.save(path).runtime()?;
    }
    let report = AugmentReport {
        rules: frs.rules.iter().map(|r| render_rule(r, d.schema())).collect(),
        input_rows: d.len(),
        modified_rows: result.modified_len,
        output_rows: result.dataset.len(),
        eta: result.eta,
        quota: result.quota,
        stop: result.stop,
        iterations: result.traces.len(),
        accepted_iterations: result.accepted_iterations(),
        instances_added: result.added,
        initial: result.initial,
        modified: result.modified,
        final_: result.final_report,
        trace: result.traces,
        config: AugmentEcho {
            data: a.data,
            schema: a.schema,
            rules: a.rules,
            trainer,
            frote,
        },
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_json(&a.report, &report)?;
    println!(
        "added {} rows in {} iterations ({} accepted); loss {:.4} -> {:.4}",
        report.instances_added,
        report.iterations,
        report.accepted_iterations,
        report.modified.j_value,
        report.final_.j_value
    );
    Ok(())
}

#[derive(Serialize)]
struct ExperimentOutput {
    #[serde(flatten)]
    report: RunReport,
    wall_time: f64,
}

fn experiment(a: ExperimentArgs) -> Outcome<()> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&a.config)
        .with_context(|| format!("cannot read {}", a.config.display()))
        .invalid()?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", a.config.display()))
        .invalid()?;
    if let Some(base) = a.config.parent() {
        cfg.resolve_paths(base);
    }
    cfg.validate().map_err(harness_failure)?;
    let report = run_experiment(&cfg).map_err(harness_failure)?;
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))
        .runtime()?;
    if let Some(w) = &report.pool_warning {
        eprintln!("warning: {w}");
    }
    for (name, s) in &report.aggregate {
        println!("{name:<28} {:>9.4} ± {:.4} (n={})", s.mean, s.std, s.n);
    }
    write_json(
        &a.out_dir.join("report.json"),
        &ExperimentOutput {
            report,
            wall_time: start.elapsed().as_secs_f64(),
        },
    )
}

fn load_schema(path: &Path) -> Outcome<Arc<Schema>> {
    Schema::load(path).map(Arc::new).invalid()
}

fn rules(cmd: RulesCommand) -> Outcome<()> {
    match cmd {
        RulesCommand::Check { schema, rules, data } => {
            let schema = load_schema(&schema)?;
            let frs = read_rules(&rules, &schema)?;
            let d: Option<Dataset> = match &data {
                Some(p) => {
                    let file = std::fs::File::open(p)
                        .with_context(|| format!("cannot open {}", p.display()))
                        .invalid()?;
                    Some(Dataset::from_csv_reader(Arc::clone(&schema), file).invalid()?)
                }
                None => None,
            };
            let mut problems = Vec::new();
            for r in &frs.rules {
                let ok = rule_satisfiable(&schema, r);
                let cov = d.as_ref().map(|d| format!(" coverage={}/{}", r.coverage(d).len(), d.len()));
                println!(
                    "{} {}{}{}",
                    r.id,
                    render_rule(r, &schema),
                    cov.unwrap_or_default(),
                    if ok { "" } else { " UNSATISFIABLE" }
                );
                if !ok {
                    problems.push(format!("rule {} can never be satisfied", r.id));
                }
            }
            for (a, b) in frs.detect_conflicts(&schema) {
                println!("conflict: {a} and {b}");
                problems.push(format!("rules {a} and {b} conflict"));
            }
            if problems.is_empty() {
                println!("ok: {} rules, no conflicts", frs.len());
                Ok(())
            } else {
                Err(Failure::Validation(anyhow!(problems.join("; "))))
            }
        }
        RulesCommand::Resolve {
            schema,
            rules,
            mixture,
            out,
        } => {
            let schema = load_schema(&schema)?;
            let frs = read_rules(&rules, &schema)?;
            let policy = match mixture {
                Some(w) if !(0.0..=1.0).contains(&w) => {
                    return Err(Failure::Validation(anyhow!("mixture weight must lie in [0, 1]")))
                }
                Some(weight) => ConflictPolicy::Mixture { weight },
                None => ConflictPolicy::ExcludeIntersection,
            };
            let resolved = frs.resolve_conflicts(&schema, policy);
            write_text(&out, &render_rule_set(&resolved, &schema))?;
            println!("{} rules in, {} rules out", frs.len(), resolved.len());
            Ok(())
        }
        RulesCommand::Perturb {
            data,
            schema,
            count,
            lo,
            hi,
            depth,
            seed,
            out,
        } => {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Failure::Validation(anyhow!("coverage bounds must satisfy 0 <= lo < hi <= 1")));
            }
            let d = load_dataset(&data, &schema).invalid()?;
            let seeds = extract_seed_rules(&d, depth, ruleaug::seed::derive(seed, "seed-rules", 0)).invalid()?;
            let mut rng = ruleaug::seed::stream(seed, "pool", 0);
            let outcome = perturb_rules(&seeds, &d, count, (lo, hi), &mut rng);
            if let Some(w) = &outcome.warning {
                eprintln!("warning: {w}");
            }
            write_text(&out, &render_rule_set(&FeedbackRuleSet::new(outcome.pool.clone()), d.schema()))?;
            println!("{} rules after {} attempts", outcome.pool.len(), outcome.attempts);
            Ok(())
        }
    }
}

fn report(e: impl Display, code: u8) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Augment(a) => augment(a),
        Command::Experiment(a) => experiment(a),
        Command::Rules(r) => rules(r),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => report(format!("{e:#}"), 2),
        Err(Failure::Runtime(e)) => report(format!("{e:#}"), 3),
    }
}
