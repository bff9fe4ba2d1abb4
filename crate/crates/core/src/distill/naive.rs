use rand::Rng;

use crate::envs::EnvKind;
use crate::error::Result;
use crate::nfc::NeuroFuzzyController;
use crate::qnet::{run_dqn, DqnConfig, DqnOutcome};
use crate::seed;

/// Controller seeded from random-policy states: centers at randomly chosen
/// visited states, widths equal to the per-dimension spread of those
/// states, small random consequents.
pub fn random_controller(kind: EnvKind, rules: usize, seed: u64) -> Result<NeuroFuzzyController> {
    let mut rng = seed::rng(seed);
    let mut env = kind.make();
    let mut states = Vec::new();
    let mut episode = 0u64;
    let mut obs = env.reset(seed::derive(seed, episode)).observation;
    while states.len() < 2_000 {
        states.push(obs.clone());
        let r = env.step(rng.gen_range(0..kind.num_actions()))?;
        obs = if r.done {
            episode += 1;
            env.reset(seed::derive(seed, episode)).observation
        } else {
            r.next_observation
        };
    }
    let m = kind.obs_dim();
    let spread: Vec<f64> = (0..m)
        .map(|i| {
            let mean = states.iter().map(|s| s[i]).sum::<f64>() / states.len() as f64;
            let var = states.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / states.len() as f64;
            var.sqrt()
        })
        .collect();
    let picks: Vec<usize> = (0..rules).map(|_| rng.gen_range(0..states.len())).collect();
    let mut centers = vec![0.0; m * rules];
    let mut widths = vec![0.0; m * rules];
    for (j, &p) in picks.iter().enumerate() {
        for i in 0..m {
            centers[i * rules + j] = states[p][i];
            widths[i * rules + j] = spread[i];
        }
    }
    let consequents: Vec<f64> = (0..rules * kind.num_actions())
        .map(|_| rng.gen_range(-0.1..0.1))
        .collect();
    Ok(NeuroFuzzyController::new(m, rules, kind.num_actions(), &centers, &widths, &consequents))
}

/// DQN settings for the naive baseline: the teacher preset with a short
/// warm-up and exploration schedule sized to a few dozen episodes, and a
/// 5-rollout greedy evaluation after every episode.
pub fn naive_dqn_config(kind: EnvKind, episodes: usize) -> DqnConfig {
    DqnConfig {
        max_episodes: episodes,
        learning_starts: 64,
        epsilon_decay_steps: 2_000,
        learning_rate: 5e-3,
        eval_interval: 1,
        eval_episodes: 5,
        stop_reward: None,
        ..DqnConfig::for_env(kind)
    }
}

/// Trains a neuro-fuzzy controller directly as the DQN Q-function.
pub fn naive_substitution(
    kind: EnvKind,
    rules: usize,
    config: &DqnConfig,
    seed: u64,
) -> Result<DqnOutcome<NeuroFuzzyController>> {
    let init = random_controller(kind, rules, seed::derive(seed, seed::stream::NAIVE))?;
    run_dqn(init, kind, config, seed)
}
