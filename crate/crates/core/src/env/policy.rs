use super::sim::{AgentAction, EpisodeSummary, SimEnv};
use crate::error::Result;

/// Chooses one action per learner from the environment's current state.
pub trait Policy {
    fn name(&self) -> String;
    /// Clears per-episode memory.
    fn reset(&mut self) {}
    fn act(&mut self, env: &SimEnv) -> Result<Vec<AgentAction>>;
}

/// Plays one full episode from `seed`.
pub fn run_episode(env: &mut SimEnv, policy: &mut dyn Policy, seed: u64) -> Result<EpisodeSummary> {
    env.reset(seed)?;
    policy.reset();
    while !env.is_done() {
        let actions = policy.act(env)?;
        env.step(&actions)?;
    }
    Ok(env.summary().clone())
}
