use std::path::{Path, PathBuf};

use crate::distill::DistillConfig;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::gmminit::GmmConfig;
use crate::postproc::{DEFAULT_ALPHA, DEFAULT_PRUNE_THRESHOLD};
use crate::qnet::{DqnConfig, OptimizerKind};
use crate::textfmt::content_lines;

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    /// Master seeds, one distillation repetition each.
    pub seeds: Vec<u64>,
    /// Seed of the single teacher shared by all repetitions.
    pub teacher_seed: u64,
    pub teacher: DqnConfig,
    pub dataset_steps: usize,
    pub rules: usize,
    pub gmm: GmmConfig,
    pub distill: DistillConfig,
    pub alpha: f64,
    pub prune_threshold: f64,
    /// Greedy episodes used for every final evaluation.
    pub eval_episodes: usize,
    /// Size of the held-out state buffer for greedy-agreement checks.
    pub holdout_steps: usize,
    /// Also train the naive baseline.
    pub naive: bool,
    /// Naive training budget as a multiple of the distillation episodes.
    pub naive_budget_factor: usize,
    /// Rule-base checkpoint after every evaluated distillation episode.
    pub checkpoints: bool,
    /// Worker threads for independent seeds; 0 lets the pool decide.
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(env: EnvKind) -> Self {
        RunConfig {
            env,
            seeds: (1..=10).collect(),
            teacher_seed: 0,
            teacher: DqnConfig::for_env(env),
            dataset_steps: 10_000,
            rules: 2,
            gmm: GmmConfig::default(),
            distill: DistillConfig {
                episodes: 20,
                ..Default::default()
            },
            alpha: DEFAULT_ALPHA,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            eval_episodes: 50,
            holdout_steps: 10_000,
            naive: true,
            naive_budget_factor: 3,
            checkpoints: true,
            threads: 0,
            output_dir: PathBuf::from(format!("runs/{}", env.name())),
        }
    }

    pub fn naive_episodes(&self) -> usize {
        self.naive_budget_factor * self.distill.episodes
    }

    /// Builds a configuration from `key = value` text; `env` must appear
    /// before any other key since it selects the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config: Option<RunConfig> = None;
        for (line, content) in content_lines(text) {
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match config.as_mut() {
                None if key == "env" => config = Some(RunConfig::new(value.parse()?)),
                None => return Err(Error::parse(line, "`env` must be the first key")),
                Some(c) => c.set(key, value).map_err(|e| match e {
                    Error::Config(msg) => Error::parse(line, msg),
                    other => other,
                })?,
            }
        }
        config.ok_or_else(|| Error::Config("configuration has no `env` key".into()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Overrides one field by its configuration key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
            }
        }
        fn optimizer(key: &str, value: &str) -> Result<OptimizerKind> {
            OptimizerKind::from_name(value)
                .ok_or_else(|| Error::Config(format!("unknown optimizer `{value}` for `{key}`")))
        }
        match key {
            "env" => {
                let env: EnvKind = value.parse()?;
                if env != self.env {
                    return Err(Error::Config("`env` cannot change after defaults are chosen".into()));
                }
            }
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "teacher_seed" => self.teacher_seed = num(key, value)?,
            "teacher_episodes" => self.teacher.max_episodes = num(key, value)?,
            "teacher_learning_rate" => self.teacher.learning_rate = num(key, value)?,
            "teacher_optimizer" => self.teacher.optimizer = optimizer(key, value)?,
            "teacher_hidden" => self.teacher.hidden_dim = num(key, value)?,
            "gamma" => self.teacher.gamma = num(key, value)?,
            "dataset_steps" => self.dataset_steps = num(key, value)?,
            "rules" => self.rules = num(key, value)?,
            "gmm_max_iter" => self.gmm.max_iter = num(key, value)?,
            "gmm_tol" => self.gmm.tol = num(key, value)?,
            "gmm_standardize" => self.gmm.standardize = flag(key, value)?,
            "tau" => self.distill.tau = num(key, value)?,
            "epsilon" => self.distill.epsilon = num(key, value)?,
            "lambda_merge" => self.distill.lambda_merge = num(key, value)?,
            "lambda_tnorm" => self.distill.lambda_tnorm = num(key, value)?,
            "batch_size" => self.distill.batch_size = num(key, value)?,
            "buffer_capacity" => self.distill.buffer_capacity = num(key, value)?,
            "learning_rate" => self.distill.learning_rate = num(key, value)?,
            "optimizer" => self.distill.optimizer = optimizer(key, value)?,
            "distill_episodes" => self.distill.episodes = num(key, value)?,
            "eval_interval" => self.distill.eval_interval = num(key, value)?,
            "distill_eval_episodes" => self.distill.eval_episodes = num(key, value)?,
            "range_scaled" => self.distill.range_scaled = flag(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "prune_threshold" => self.prune_threshold = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "holdout_steps" => self.holdout_steps = num(key, value)?,
            "naive" => self.naive = flag(key, value)?,
            "naive_budget_factor" => self.naive_budget_factor = num(key, value)?,
            "checkpoints" => self.checkpoints = flag(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.rules == 0 || self.dataset_steps < self.rules {
            return bad("need at least one rule and as many dataset rows as rules");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return bad("prune threshold must lie in [0, 1)");
        }
        if self.eval_episodes == 0 || self.holdout_steps == 0 {
            return bad("evaluation episodes and holdout size must be positive");
        }
        self.teacher.validate()?;
        self.distill.validate()
    }

    /// `key = value` form accepted by [`RunConfig::from_text`].
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let d = &self.distill;
        let lines = [
            format!("env = {}", self.env.name()),
            format!("seeds = {}", seeds.join(",")),
            format!("teacher_seed = {}", self.teacher_seed),
            format!("teacher_episodes = {}", self.teacher.max_episodes),
            format!("teacher_learning_rate = {}", self.teacher.learning_rate),
            format!("teacher_optimizer = {}", self.teacher.optimizer.name()),
            format!("teacher_hidden = {}", self.teacher.hidden_dim),
            format!("gamma = {}", self.teacher.gamma),
            format!("dataset_steps = {}", self.dataset_steps),
            format!("rules = {}", self.rules),
            format!("gmm_max_iter = {}", self.gmm.max_iter),
            format!("gmm_tol = {}", self.gmm.tol),
            format!("gmm_standardize = {}", self.gmm.standardize),
            format!("tau = {}", d.tau),
            format!("epsilon = {}", d.epsilon),
            format!("lambda_merge = {}", d.lambda_merge),
            format!("lambda_tnorm = {}", d.lambda_tnorm),
            format!("batch_size = {}", d.batch_size),
            format!("buffer_capacity = {}", d.buffer_capacity),
            format!("learning_rate = {}", d.learning_rate),
            format!("optimizer = {}", d.optimizer.name()),
            format!("distill_episodes = {}", d.episodes),
            format!("eval_interval = {}", d.eval_interval),
            format!("distill_eval_episodes = {}", d.eval_episodes),
            format!("range_scaled = {}", d.range_scaled),
            format!("alpha = {}", self.alpha),
            format!("prune_threshold = {}", self.prune_threshold),
            format!("eval_episodes = {}", self.eval_episodes),
            format!("holdout_steps = {}", self.holdout_steps),
            format!("naive = {}", self.naive),
            format!("naive_budget_factor = {}", self.naive_budget_factor),
            format!("checkpoints = {}", self.checkpoints),
            format!("threads = {}", self.threads),
            format!("output_dir = {}", self.output_dir.display()),
        ];
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
