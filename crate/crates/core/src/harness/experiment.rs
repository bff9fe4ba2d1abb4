use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::eval::{evaluate, EpisodeStats, EvalSummary};
use super::report::{curves_csv, episodes_csv, export_membership_curves, render_rule_table, write_file, QuantileCurve};
use crate::distill::{distill_with_observer, naive_dqn_config, naive_substitution};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::gmminit::{collect_dataset, init_controller, write_dataset};
use crate::nfc::NeuroFuzzyController;
use crate::postproc::simplify;
use crate::qnet::{train_teacher, MlpQNetwork};
use crate::seed;
use crate::textfmt::fmt_f64;

/// Samples per set in `membership.csv`.
pub const MEMBERSHIP_SAMPLES: usize = 201;

#[derive(Clone, Debug)]
pub struct NaiveResult {
    /// Evaluation of the controller at the end of training.
    pub eval: EvalSummary,
    pub episodes: Vec<EpisodeStats>,
    pub skipped_samples: u64,
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub init: EvalSummary,
    pub distilled: EvalSummary,
    /// After merging and pruning.
    pub simplified: EvalSummary,
    /// Fraction of held-out states where the simplified controller picks the
    /// same greedy action as the distilled one.
    pub agreement: f64,
    /// Inputs used by at least one rule after simplification.
    pub kept_inputs: Vec<usize>,
    pub merges: usize,
    pub prunes: usize,
    pub distill_episodes: Vec<EpisodeStats>,
    pub naive: Option<NaiveResult>,
    /// Final rule base, kept for reporting.
    pub controller: NeuroFuzzyController,
    /// Seconds spent on this seed. Not written to result files.
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub env: EnvKind,
    pub teacher: EvalSummary,
    pub seeds: Vec<SeedResult>,
    pub distilled_curve: QuantileCurve,
    pub naive_curve: Option<QuantileCurve>,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

/// Evaluation seed shared by every final evaluation of a repetition, so
/// teacher, students and baseline face the same start states.
pub fn final_eval_seed(seed: u64) -> u64 {
    seed::derive(seed, seed::stream::FINAL_EVAL)
}

/// Loads `teacher.weights` from `teacher_path` if given, otherwise trains a
/// teacher with `config.teacher_seed`. The weights (and training curve, if
/// trained) are written to the output directory.
pub fn prepare_teacher(config: &RunConfig, teacher_path: Option<&Path>) -> Result<MlpQNetwork> {
    let root = &config.output_dir;
    create_dir(root)?;
    let net = match teacher_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            MlpQNetwork::from_text(&text)?
        }
        None => {
            let (net, stats) = train_teacher(config.env, &config.teacher, config.teacher_seed)?;
            write_file(&root.join("teacher_episodes.csv"), &episodes_csv(&stats))?;
            net
        }
    };
    write_file(&root.join("teacher.weights"), &net.to_text())?;
    Ok(net)
}

/// Collect, initialize, distill, simplify and evaluate for one master seed,
/// writing every artifact into `dir`.
pub fn run_seed(config: &RunConfig, teacher: &MlpQNetwork, seed: u64, dir: &Path) -> Result<SeedResult> {
    let started = Instant::now();
    let kind = config.env;
    let names = kind.feature_names();
    create_dir(dir)?;
    let eval_seed = final_eval_seed(seed);

    let dataset = collect_dataset(teacher, kind, config.dataset_steps, seed::derive(seed, seed::stream::DATASET))
        .map_err(|e| e.in_stage("collect"))?;
    write_dataset(&dir.join("dataset.csv"), &dataset, &names).map_err(|e| e.in_stage("collect"))?;

    let (init, _) = init_controller(&dataset, config.rules, &config.gmm, seed::derive(seed, seed::stream::GMM))
        .map_err(|e| e.in_stage("init"))?;
    write_file(&dir.join("controller.init"), &init.to_text())?;
    let init_eval = evaluate(&init, kind, config.eval_episodes, eval_seed).map_err(|e| e.in_stage("evaluate"))?;

    let checkpoint_dir = dir.join("checkpoints");
    if config.checkpoints {
        create_dir(&checkpoint_dir)?;
    }
    let outcome = distill_with_observer(teacher, init, kind, &config.distill, seed, &mut |stats, ctrl| {
        if config.checkpoints && stats.eval_median.is_some() {
            let path = checkpoint_dir.join(format!("episode-{:04}.nfc", stats.episode));
            write_file(&path, &ctrl.to_text())?;
        }
        Ok(())
    })
    .map_err(|e| e.in_stage("distill"))?;
    let distilled = outcome.student;
    write_file(&dir.join("controller.distilled"), &distilled.to_text())?;
    write_file(&dir.join("episodes.csv"), &episodes_csv(&outcome.episodes))?;

    let (simplified, log) = simplify(&distilled, config.alpha, config.prune_threshold);
    write_file(&dir.join("controller.final"), &simplified.to_text())?;
    write_file(&dir.join("simplification.log"), &log.to_text(&names))?;
    write_file(
        &dir.join("membership.csv"),
        &export_membership_curves(&simplified, MEMBERSHIP_SAMPLES),
    )?;

    let distilled_eval = evaluate(&distilled, kind, config.eval_episodes, eval_seed).map_err(|e| e.in_stage("evaluate"))?;
    let simplified_eval =
        evaluate(&simplified, kind, config.eval_episodes, eval_seed).map_err(|e| e.in_stage("evaluate"))?;
    let agreement = greedy_agreement(&distilled, &simplified, kind, config.holdout_steps, seed)
        .map_err(|e| e.in_stage("evaluate"))?;

    let naive = if config.naive {
        let dqn = naive_dqn_config(kind, config.naive_episodes());
        let out = naive_substitution(kind, config.rules, &dqn, seed).map_err(|e| e.in_stage("naive"))?;
        write_file(&dir.join("controller.naive"), &out.last.to_text())?;
        write_file(&dir.join("naive_episodes.csv"), &episodes_csv(&out.episodes))?;
        let eval = evaluate(&out.last, kind, config.eval_episodes, eval_seed).map_err(|e| e.in_stage("evaluate"))?;
        Some(NaiveResult {
            eval,
            episodes: out.episodes,
            skipped_samples: out.skipped_samples,
        })
    } else {
        None
    };

    Ok(SeedResult {
        seed,
        init: init_eval,
        distilled: distilled_eval,
        simplified: simplified_eval,
        agreement,
        kept_inputs: (0..kind.obs_dim()).filter(|&i| !simplified.dimension_pruned(i)).collect(),
        merges: log.merges.len(),
        prunes: log.prunes.len(),
        distill_episodes: outcome.episodes,
        naive,
        controller: simplified,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Greedy-action agreement between two controllers on states visited by
/// greedy rollouts of `reference`.
pub fn greedy_agreement(
    reference: &NeuroFuzzyController,
    other: &NeuroFuzzyController,
    kind: EnvKind,
    states: usize,
    seed: u64,
) -> Result<f64> {
    let holdout = collect_dataset(reference, kind, states, seed::derive(seed, seed::stream::HOLDOUT))?;
    let mut same = 0usize;
    for s in &holdout {
        if reference.greedy_action(&s.state)? == other.greedy_action(&s.state)? {
            same += 1;
        }
    }
    Ok(same as f64 / holdout.len() as f64)
}

/// Full pipeline over every seed in the configuration. Seeds run in
/// parallel; all aggregate files are written after the last one finishes.
pub fn run_experiment(config: &RunConfig, teacher_path: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    let root = config.output_dir.clone();
    let teacher = prepare_teacher(config, teacher_path).map_err(|e| e.in_stage("teacher"))?;
    write_file(&root.join("config.txt"), &config.to_text())?;
    let teacher_eval = evaluate(&teacher, config.env, config.eval_episodes, final_eval_seed(config.teacher_seed))
        .map_err(|e| e.in_stage("teacher"))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let seeds: Vec<SeedResult> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&s| run_seed(config, &teacher, s, &seed_dir(&root, s)))
            .collect::<Result<_>>()
    })?;

    let distilled_curve = QuantileCurve::from_runs(&seeds.iter().map(|s| s.distill_episodes.clone()).collect::<Vec<_>>());
    let naive_curve = config.naive.then(|| {
        QuantileCurve::from_runs(
            &seeds
                .iter()
                .filter_map(|s| s.naive.as_ref().map(|n| n.episodes.clone()))
                .collect::<Vec<_>>(),
        )
    });
    let report = ExperimentReport {
        env: config.env,
        teacher: teacher_eval,
        seeds,
        distilled_curve,
        naive_curve,
    };
    write_file(&root.join("curves.csv"), &curves_csv(&report.distilled_curve, report.naive_curve.as_ref()))?;
    write_file(&root.join("summary.csv"), &summary_csv(&report))?;
    write_file(&root.join("report.txt"), &render_report(&report))?;
    Ok(report)
}

/// Per-seed evaluation results, plus a `teacher` row.
pub fn summary_csv(report: &ExperimentReport) -> String {
    let names = report.env.feature_names();
    let mut out = String::from(
        "run,init_median,distilled_median,distilled_q1,distilled_q3,final_median,final_q1,final_q3,agreement,kept_inputs,merges,prunes,naive_median,naive_q1,naive_q3\n",
    );
    let t = &report.teacher;
    let _ = writeln!(out, "teacher,,{},{},{},,,,,,,,,,", fmt_f64(t.median), fmt_f64(t.q1), fmt_f64(t.q3));
    for s in &report.seeds {
        let kept: Vec<&str> = s.kept_inputs.iter().map(|&i| names[i].as_str()).collect();
        let naive = s.naive.as_ref().map_or([String::new(), String::new(), String::new()], |n| {
            [fmt_f64(n.eval.median), fmt_f64(n.eval.q1), fmt_f64(n.eval.q3)]
        });
        let _ = writeln!(
            out,
            "seed-{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.seed,
            fmt_f64(s.init.median),
            fmt_f64(s.distilled.median),
            fmt_f64(s.distilled.q1),
            fmt_f64(s.distilled.q3),
            fmt_f64(s.simplified.median),
            fmt_f64(s.simplified.q1),
            fmt_f64(s.simplified.q3),
            fmt_f64(s.agreement),
            kept.join(";"),
            s.merges,
            s.prunes,
            naive[0],
            naive[1],
            naive[2],
        );
    }
    out
}

/// Human-readable digest of `summary.csv` and the final rule bases.
pub fn render_report(report: &ExperimentReport) -> String {
    let names = report.env.feature_names();
    let mut out = String::new();
    let t = &report.teacher;
    let _ = writeln!(out, "environment: {}", report.env);
    let _ = writeln!(
        out,
        "teacher median reward: {} (q1 {}, q3 {}, {} episodes)",
        t.median,
        t.q1,
        t.q3,
        t.rewards.len()
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10} {:>8} {:>10} {:>8} {:>9} {:>8}  kept inputs", "run", "init", "distilled", "final", "agreement", "naive");
    for s in &report.seeds {
        let kept: Vec<&str> = s.kept_inputs.iter().map(|&i| names[i].as_str()).collect();
        let naive = s.naive.as_ref().map_or("-".to_string(), |n| n.eval.median.to_string());
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>10} {:>8} {:>9.4} {:>8}  {}",
            format!("seed-{}", s.seed),
            s.init.median,
            s.distilled.median,
            s.simplified.median,
            s.agreement,
            naive,
            kept.join(", ")
        );
    }
    let c = &report.distilled_curve;
    if !c.is_empty() {
        let last = c.len() - 1;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "distillation curve: median {} (q1 {}, q3 {}) after episode {}",
            c.median[last], c.q1[last], c.q3[last], last
        );
    }
    if let Some(n) = report.naive_curve.as_ref().filter(|n| !n.is_empty()) {
        let last = n.len() - 1;
        let _ = writeln!(
            out,
            "naive curve: median {} (q1 {}, q3 {}) after episode {}",
            n.median[last], n.q1[last], n.q3[last], last
        );
    }
    for s in &report.seeds {
        let _ = writeln!(out);
        let _ = writeln!(out, "final rule base, seed-{}:", s.seed);
        out.push_str(&render_rule_table(&s.controller, &names));
    }
    out
}
