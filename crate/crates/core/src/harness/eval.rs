use crate::envs::EnvKind;
use crate::error::Result;
use crate::qnet::QFunction;
use crate::seed;

/// Per-episode training record.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Total reward collected while training (exploration included).
    pub reward: f64,
    pub loss_mean: f64,
    /// Median of the greedy evaluation run after this episode, if any.
    pub eval_median: Option<f64>,
    /// Seconds spent on the episode. Not written to result files.
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub rewards: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl EvalSummary {
    pub fn from_rewards(rewards: Vec<f64>) -> Self {
        let mut sorted = rewards.clone();
        sorted.sort_by(f64::total_cmp);
        EvalSummary {
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
            rewards,
        }
    }
}

/// Linearly interpolated quantile of already sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs `episodes` greedy episodes, each in a fresh environment reset with a
/// seed derived from `seed` and the episode index.
pub fn evaluate<Q: QFunction + ?Sized>(
    policy: &Q,
    kind: EnvKind,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary> {
    assert!(episodes >= 1, "evaluation needs at least one episode");
    let mut rewards = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut env = kind.make();
        let mut obs = env.reset(seed::derive(seed, e as u64)).observation;
        let mut total = 0.0;
        loop {
            let r = env.step(policy.greedy_action(&obs)?)?;
            total += r.reward;
            if r.done {
                break;
            }
            obs = r.next_observation;
        }
        rewards.push(total);
    }
    Ok(EvalSummary::from_rewards(rewards))
}
