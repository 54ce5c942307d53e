//! Desk-scale reproduction of the experimental protocol: bundled
//! benchmarks, seed-rule extraction, rule perturbation and multi-run
//! experiments with held-out evaluation.

pub mod benchmark;
pub mod experiment;
pub mod extract;
pub mod perturb;

pub use benchmark::{loans, quarter_plane, two_blobs, BlobsConfig, QUARTER_PLANE_RULE};
pub use experiment::{
    evaluate, run_experiment, run_once, DataSource, ExperimentConfig, HarnessError, Metrics, RunEntry, RunReport,
    Summary,
};
pub use extract::{extract_seed_rules, ExtractError};
pub use perturb::{perturb_rules, PerturbOutcome, Perturbation};
