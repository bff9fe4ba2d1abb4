use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fuzzy_distill::distill::{distill_with_observer, naive_dqn_config, naive_substitution, DistillConfig};
use fuzzy_distill::envs::EnvKind;
use fuzzy_distill::gmminit::{collect_dataset, init_controller, read_dataset, write_dataset, GmmConfig};
use fuzzy_distill::harness::{
    episodes_csv, evaluate, export_membership_curves, render_rule_table, run_experiment, RunConfig,
    MEMBERSHIP_SAMPLES,
};
use fuzzy_distill::nfc::NeuroFuzzyController;
use fuzzy_distill::postproc::{simplify, DEFAULT_ALPHA, DEFAULT_PRUNE_THRESHOLD};
use fuzzy_distill::qnet::{train_teacher, DqnConfig, MlpQNetwork, QFunction};
use fuzzy_distill::{seed, Error, Result};

#[derive(Parser)]
#[command(name = "fuzzy-distill", version, about = "Distill DQN policies into neuro-fuzzy controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DQN teacher and write its weights.
    TrainTeacher(TrainTeacherArgs),
    /// Roll out a teacher greedily and write a (state, Q) dataset.
    Collect(CollectArgs),
    /// Fit a Gaussian mixture on a dataset and write the initial rule base.
    Init(InitArgs),
    /// Distill a teacher into a rule base.
    Distill(DistillArgs),
    /// Train a rule base directly with the DQN loss (baseline).
    Naive(NaiveArgs),
    /// Merge similar sets and prune unimportant terms.
    Postprocess(PostprocessArgs),
    /// Greedy evaluation of a teacher or rule-base file.
    Evaluate(EvaluateArgs),
    /// Print the rule table and optionally export membership curves.
    Report(ReportArgs),
    /// Run the full pipeline for every configured seed.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct EnvArg {
    /// cartpole or mountaincar
    #[arg(long)]
    env: EnvKind,
}

#[derive(Args)]
struct TrainTeacherArgs {
    #[command(flatten)]
    env: EnvArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the per-environment episode budget.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Per-episode training statistics (CSV).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct CollectArgs {
    #[command(flatten)]
    env: EnvArg,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Master seed; the dataset stream is derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 2)]
    rules: usize,
    /// Master seed; the mixture stream is derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistillArgs {
    #[command(flatten)]
    env: EnvArg,
    #[arg(long)]
    teacher: PathBuf,
    /// Initial rule base.
    #[arg(long)]
    controller: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Directory for per-episode rule-base checkpoints.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
}

#[derive(Args)]
struct NaiveArgs {
    #[command(flatten)]
    env: EnvArg,
    #[arg(long, default_value_t = 2)]
    rules: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    episodes: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct PostprocessArgs {
    #[arg(long)]
    controller: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_PRUNE_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
    /// Simplification log; needs --env for input names.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    env: EnvArg,
    /// Teacher weights or rule-base file.
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    /// Master seed; the evaluation stream is derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    env: EnvArg,
    #[arg(long)]
    controller: PathBuf,
    /// Write membership curves (CSV) here.
    #[arg(long)]
    membership: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    /// Comma-separated master seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse these teacher weights instead of training.
    #[arg(long)]
    teacher: Option<PathBuf>,
    /// Any configuration key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_teacher(path: &Path) -> Result<MlpQNetwork> {
    MlpQNetwork::from_text(&read(path)?)
}

fn load_controller(path: &Path) -> Result<NeuroFuzzyController> {
    NeuroFuzzyController::from_text(&read(path)?)
}

fn train_teacher_cmd(a: TrainTeacherArgs) -> Result<()> {
    let kind = a.env.env;
    let mut config = DqnConfig::for_env(kind);
    if let Some(e) = a.episodes {
        config.max_episodes = e;
    }
    let (net, stats) = train_teacher(kind, &config, a.seed)?;
    write(&a.out, &net.to_text())?;
    if let Some(path) = a.stats {
        write(&path, &episodes_csv(&stats))?;
    }
    Ok(())
}

fn collect_cmd(a: CollectArgs) -> Result<()> {
    let kind = a.env.env;
    let teacher = load_teacher(&a.teacher)?;
    let data = collect_dataset(&teacher, kind, a.steps, seed::derive(a.seed, seed::stream::DATASET))?;
    write_dataset(&a.out, &data, &kind.feature_names())
}

fn init_cmd(a: InitArgs) -> Result<()> {
    let data = read_dataset(&a.dataset)?;
    let (ctrl, fit) = init_controller(&data, a.rules, &GmmConfig::default(), seed::derive(a.seed, seed::stream::GMM))?;
    write(&a.out, &ctrl.to_text())?;
    println!(
        "mixture: {} iterations, mean log-likelihood {}, {} reseeds",
        fit.iterations,
        fit.log_likelihood.last().copied().unwrap_or(f64::NAN),
        fit.reseeds
    );
    Ok(())
}

fn distill_cmd(a: DistillArgs) -> Result<()> {
    let kind = a.env.env;
    let teacher = load_teacher(&a.teacher)?;
    let student = load_controller(&a.controller)?;
    let mut config = DistillConfig::default();
    if let Some(e) = a.episodes {
        config.episodes = e;
    }
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(dir) = &a.checkpoints {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let outcome = distill_with_observer(&teacher, student, kind, &config, a.seed, &mut |stats, ctrl| {
        if let (Some(dir), Some(m)) = (&a.checkpoints, stats.eval_median) {
            write(&dir.join(format!("episode-{:04}.nfc", stats.episode)), &ctrl.to_text())?;
            println!("episode {:>4}  reward {:>7}  eval median {:>7}  loss {:.5}", stats.episode, stats.reward, m, stats.loss_mean);
        }
        Ok(())
    })?;
    write(&a.out, &outcome.student.to_text())?;
    if let Some(path) = a.stats {
        write(&path, &episodes_csv(&outcome.episodes))?;
    }
    Ok(())
}

fn naive_cmd(a: NaiveArgs) -> Result<()> {
    let kind = a.env.env;
    let outcome = naive_substitution(kind, a.rules, &naive_dqn_config(kind, a.episodes), a.seed)?;
    write(&a.out, &outcome.last.to_text())?;
    if let Some(path) = a.stats {
        write(&path, &episodes_csv(&outcome.episodes))?;
    }
    println!("skipped degenerate samples: {}", outcome.skipped_samples);
    Ok(())
}

fn postprocess_cmd(a: PostprocessArgs) -> Result<()> {
    let ctrl = load_controller(&a.controller)?;
    let (out, log) = simplify(&ctrl, a.alpha, a.threshold);
    write(&a.out, &out.to_text())?;
    let names = match a.env {
        Some(kind) => kind.feature_names(),
        None => (0..ctrl.inputs()).map(|i| format!("x{i}")).collect(),
    };
    let text = log.to_text(&names);
    match a.log {
        Some(path) => write(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let kind = a.env.env;
    let text = read(&a.policy)?;
    let policy: Box<dyn QFunction> = if text.starts_with("mlp-qnet") {
        Box::new(MlpQNetwork::from_text(&text)?)
    } else {
        Box::new(NeuroFuzzyController::from_text(&text)?)
    };
    let summary = evaluate(policy.as_ref(), kind, a.episodes, seed::derive(a.seed, seed::stream::FINAL_EVAL))?;
    println!("median {} q1 {} q3 {} over {} episodes", summary.median, summary.q1, summary.q3, a.episodes);
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let ctrl = load_controller(&a.controller)?;
    if ctrl.inputs() != a.env.env.obs_dim() {
        return Err(Error::DimensionMismatch { expected: a.env.env.obs_dim(), got: ctrl.inputs() });
    }
    print!("{}", render_rule_table(&ctrl, &a.env.env.feature_names()));
    if let Some(path) = a.membership {
        write(&path, &export_membership_curves(&ctrl, MEMBERSHIP_SAMPLES))?;
    }
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let mut config = match (&a.config, a.env) {
        (Some(path), env) => {
            let c = RunConfig::load(path)?;
            if env.is_some_and(|e| e != c.env) {
                return Err(Error::Config("--env disagrees with the configuration file".into()));
            }
            c
        }
        (None, Some(env)) => RunConfig::new(env),
        (None, None) => return Err(Error::Config("either --config or --env is required".into())),
    };
    if let Some(seeds) = &a.seeds {
        config.set("seeds", seeds)?;
    }
    if let Some(out) = a.out {
        config.output_dir = out;
    }
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
        config.set(k.trim(), v.trim())?;
    }
    let report = run_experiment(&config, a.teacher.as_deref())?;
    println!(
        "teacher median {}; results in {}",
        report.teacher.median,
        config.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result) = match cli.command {
        Command::TrainTeacher(a) => ("train-teacher", train_teacher_cmd(a)),
        Command::Collect(a) => ("collect", collect_cmd(a)),
        Command::Init(a) => ("init", init_cmd(a)),
        Command::Distill(a) => ("distill", distill_cmd(a)),
        Command::Naive(a) => ("naive", naive_cmd(a)),
        Command::Postprocess(a) => ("postprocess", postprocess_cmd(a)),
        Command::Evaluate(a) => ("evaluate", evaluate_cmd(a)),
        Command::Report(a) => ("report", report_cmd(a)),
        Command::Experiment(a) => ("experiment", experiment_cmd(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.in_stage(stage));
            ExitCode::FAILURE
        }
    }
}
