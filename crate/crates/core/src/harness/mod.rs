//! Evaluation, reporting, configuration and end-to-end experiment runs.

mod config;
mod eval;
mod experiment;
mod report;

pub use config::RunConfig;
pub use eval::{evaluate, quantile, EpisodeStats, EvalSummary};
pub use experiment::{
    final_eval_seed, greedy_agreement, prepare_teacher, render_report, run_experiment, run_seed, seed_dir,
    summary_csv, ExperimentReport, NaiveResult, SeedResult, MEMBERSHIP_SAMPLES,
};
pub use report::{curves_csv, episodes_csv, export_membership_curves, render_rule_table, QuantileCurve};
