//! `eval`: run a scripted policy over an episode manifest and write the
//! metric report.

use crate::usage_error;
use anyhow::{Context, Result};
use navgeom::evalsim::{
    evaluate_batch, greedy_straight, noisy_oracle, oracle_policy, run_episode, Episode,
    MetricReport, Policy, Rollout, RunOptions,
};
use navgeom::rng::substream;
use rand::Rng;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyName {
    Oracle,
    NoisyOracle,
    GreedyStraight,
}

impl PolicyName {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "oracle" => Some(Self::Oracle),
            "noisy-oracle" => Some(Self::NoisyOracle),
            "greedy-straight" => Some(Self::GreedyStraight),
            _ => None,
        }
    }

    fn build(&self, episode: &Episode, sigma: f64) -> Box<dyn Policy> {
        match self {
            Self::Oracle => Box::new(oracle_policy(episode)),
            Self::NoisyOracle => Box::new(noisy_oracle(episode, sigma)),
            Self::GreedyStraight => Box::new(greedy_straight(episode)),
        }
    }
}

pub fn run(
    episodes_manifest: &Path,
    policy_name: &str,
    sigma: f64,
    seed: u64,
    deviation_samples: usize,
    out: &Path,
) -> Result<MetricReport> {
    let Some(policy) = PolicyName::parse(policy_name) else {
        return usage_error(format!(
            "unknown policy {policy_name:?}; expected oracle, noisy-oracle, or greedy-straight"
        ));
    };
    if sigma.is_nan() || sigma < 0.0 {
        return usage_error("sigma must be non-negative");
    }
    let episodes = navgeom::evalsim::load_episodes(episodes_manifest)
        .with_context(|| format!("loading {}", episodes_manifest.display()))?;
    if episodes.is_empty() {
        return usage_error("episode manifest contains no episodes");
    }
    let rollouts = rollout_batch(&episodes, policy, sigma, seed)?;
    let eps: Vec<Episode> = episodes.into_iter().map(|(_, e)| e).collect();
    let report = evaluate_batch(&eps, &rollouts, deviation_samples)?;
    report.write_json(out)?;
    Ok(report)
}

pub fn rollout_batch(
    episodes: &[(String, Episode)],
    policy: PolicyName,
    sigma: f64,
    seed: u64,
) -> Result<Vec<Rollout>> {
    episodes
        .iter()
        .map(|(id, episode)| {
            let rollout_seed: u64 = substream(seed, id).gen();
            let mut p = policy.build(episode, sigma);
            Ok(run_episode(
                episode,
                p.as_mut(),
                rollout_seed,
                &RunOptions::default(),
            )?)
        })
        .collect()
}
