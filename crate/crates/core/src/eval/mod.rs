//! Ranking metrics, the two-stage multi-round experiment and the
//! signed-rank test used to compare runs.

mod experiment;
mod metrics;
mod wilcoxon;

pub use experiment::{evaluate_fold, k_sweep, round_subset, run_experiment, EvalConfig, EvalRecord, KReport, Report, RoundSummary};
pub use metrics::{metrics_at_n, random_f1, Metrics, METRIC_NAMES};
pub use wilcoxon::{wilcoxon_signed_rank, SignedRankTest, MIN_PAIRS};
