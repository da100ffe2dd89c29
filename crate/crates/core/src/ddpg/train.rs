use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decode::decode_action;
use super::learner::{Ddpg, LearnerConfig, TrainStats};
use super::nets::{ActorNet, CriticNet};
use super::noise::OuNoise;
use super::replay::{Experience, ReplayBuffer};
use crate::env::{run_episode, ActionSpace, AgentAction, Policy, SimEnv};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::rng::Rng64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub discount: f64,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    /// Observations the actor's LSTM sees.
    pub window: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_norm: Option<f64>,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    /// Per-episode multiplier on `ou_sigma`, floored at `sigma_min`.
    pub sigma_decay: f64,
    pub sigma_min: f64,
    /// Episodes of uniformly random scores before the actor takes over.
    pub warmup_episodes: usize,
    pub updates_per_step: usize,
    pub reward_scale: f64,
    pub seed: u64,
    /// Save the actor every this many episodes (0 = never).
    pub checkpoint_every: usize,
    /// Noise-free evaluation every this many episodes (0 = never); the
    /// best evaluated actor is returned.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 200,
            discount: 0.99,
            tau: 0.005,
            buffer_capacity: 50_000,
            batch_size: 64,
            actor_hidden: 64,
            critic_hidden: 64,
            window: 8,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            clip_norm: Some(5.0),
            ou_theta: 0.15,
            ou_sigma: 0.2,
            sigma_decay: 1.0,
            sigma_min: 0.0,
            warmup_episodes: 0,
            updates_per_step: 1,
            reward_scale: 1.0,
            seed: 0,
            checkpoint_every: 0,
            eval_every: 0,
            eval_episodes: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be positive"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::validation("buffer_capacity", "must hold at least one batch"));
        }
        if self.actor_hidden == 0 || self.critic_hidden == 0 || self.window == 0 {
            return Err(Error::validation("actor_hidden", "network sizes and window must be positive"));
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr), ("reward_scale", self.reward_scale)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        if !(self.ou_sigma >= 0.0) || !(self.ou_theta >= 0.0) || !(self.sigma_decay > 0.0) {
            return Err(Error::validation("ou_sigma", "noise parameters must be nonnegative"));
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return Err(Error::validation("eval_episodes", "must be positive when evaluating"));
        }
        Ok(())
    }

    fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            discount: self.discount,
            tau: self.tau,
            batch_size: self.batch_size,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            clip_norm: self.clip_norm,
        }
    }
}

/// Seed of training episode `k`.
pub fn episode_seed(base: u64, k: u64) -> u64 {
    let r = Rng64::new(base ^ 0x5eed_0000_0000_0000);
    r.fork(k).next_u64()
}

/// Seed of validation episode `k`, disjoint in practice from training.
pub fn validation_seed(base: u64, k: u64) -> u64 {
    let r = Rng64::new(base ^ 0x7a11_da7e_0000_0000);
    r.fork(k).next_u64()
}

/// Greedy (noise-free) execution of a trained actor.
#[derive(Debug, Clone)]
pub struct DdpgPolicy {
    pub actor: ActorNet,
    pub space: ActionSpace,
    histories: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub obs_len: usize,
    pub hidden: usize,
    pub score_len: usize,
    pub window: usize,
}

impl DdpgPolicy {
    pub fn new(actor: ActorNet, space: ActionSpace) -> Result<Self> {
        if actor.score_len() != space.score_len() {
            return Err(Error::shape("actor output", space.score_len(), actor.score_len()));
        }
        Ok(DdpgPolicy {
            actor,
            space,
            histories: Vec::new(),
        })
    }

    pub fn meta(&self) -> PolicyMeta {
        PolicyMeta {
            obs_len: self.actor.obs_len(),
            hidden: self.actor.lstm.hidden_size(),
            score_len: self.actor.score_len(),
            window: self.actor.window,
        }
    }

    /// Writes `policy.json` and `actor.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.display().to_string(),
            source,
        })?;
        let meta = dir.join("policy.json");
        std::fs::write(&meta, serde_json::to_string_pretty(&self.meta())?).map_err(|source| Error::File {
            path: meta.display().to_string(),
            source,
        })?;
        Checkpoint::from_params(&self.actor).save(&dir.join("actor.json"))
    }

    pub fn load(dir: &Path, space: ActionSpace) -> Result<Self> {
        let meta_path = dir.join("policy.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|source| Error::File {
            path: meta_path.display().to_string(),
            source,
        })?;
        let meta: PolicyMeta = serde_json::from_str(&text)?;
        let mut actor = ActorNet::new(meta.obs_len, meta.hidden, meta.score_len, meta.window, &mut Rng64::new(0));
        Checkpoint::load(&dir.join("actor.json"))?.restore(&mut actor)?;
        Self::new(actor, space)
    }

    fn scores(&mut self, env: &SimEnv) -> Result<Vec<Vec<f64>>> {
        let obs = env.observe_all()?;
        if self.histories.len() != obs.len() {
            self.histories = vec![Vec::new(); obs.len()];
        }
        obs.into_iter()
            .zip(&mut self.histories)
            .map(|(o, h)| {
                h.push(o);
                if h.len() > self.actor.window {
                    h.remove(0);
                }
                self.actor.act(h)
            })
            .collect()
    }
}

impl Policy for DdpgPolicy {
    fn name(&self) -> String {
        "ddpg".into()
    }

    fn reset(&mut self) {
        self.histories.clear();
    }

    fn act(&mut self, env: &SimEnv) -> Result<Vec<AgentAction>> {
        let space = self.space;
        self.scores(env)?.iter().map(|s| decode_action(s, space)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub episode_return: f64,
    pub served: u64,
    pub lost: u64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub sigma: f64,
    /// Mean noise-free validation return, when evaluated this episode.
    pub eval_return: Option<f64>,
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: DdpgPolicy,
    pub curve: Vec<CurveRow>,
    pub learner: Ddpg,
    /// Episode whose actor was returned (`None` for the final actor).
    pub best_episode: Option<usize>,
}

fn evaluate_mean(env: &mut SimEnv, actor: &ActorNet, config: &TrainConfig) -> Result<f64> {
    let mut policy = DdpgPolicy::new(actor.clone(), env.action_space())?;
    let mut total = 0.0;
    for k in 0..config.eval_episodes {
        total += run_episode(env, &mut policy, validation_seed(config.seed, k as u64))?.episode_return;
    }
    Ok(total / config.eval_episodes as f64)
}

/// Trains one actor shared by every learner of `env`.
///
/// Each step, every learner's padded history goes through the online actor;
/// OU noise (uniform scores during warmup) is added and clipped to
/// `[-1, 1]`, the scores are decoded and executed, and the transition of
/// every learner enters the buffer. Once a batch is available, each step
/// runs `updates_per_step` learner updates.
pub fn train(env: &mut SimEnv, config: &TrainConfig, checkpoint_dir: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let space = env.action_space();
    let obs_len = env.observation_len();
    let mut rng = Rng64::new(config.seed);
    let actor = ActorNet::new(obs_len, config.actor_hidden, space.score_len(), config.window, &mut rng);
    let critic = CriticNet::new(obs_len, space.score_len(), config.critic_hidden, &mut rng);
    let mut learner = Ddpg::new(actor, critic, config.learner())?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut explore = rng.fork(1);
    let mut sample_rng = rng.fork(2);
    let mut curve = Vec::with_capacity(config.episodes);
    let mut best: Option<(f64, usize, ActorNet)> = None;
    let mut sigma = config.ou_sigma;

    for episode in 0..config.episodes {
        env.reset(episode_seed(config.seed, episode as u64))?;
        let learners = env.learners().len();
        let mut noise: Vec<OuNoise> = (0..learners).map(|_| OuNoise::new(space.score_len(), config.ou_theta, sigma)).collect();
        let mut histories: Vec<Vec<Vec<f64>>> = vec![Vec::new(); learners];
        let mut obs = env.observe_all()?;
        for (h, o) in histories.iter_mut().zip(&obs) {
            h.push(o.clone());
        }
        let (mut critic_loss, mut actor_loss, mut updates) = (0.0, 0.0, 0usize);
        while !env.is_done() {
            let mut raw = Vec::with_capacity(learners);
            let mut actions = Vec::with_capacity(learners);
            for i in 0..learners {
                let scores: Vec<f64> = if episode < config.warmup_episodes {
                    (0..space.score_len()).map(|_| explore.uniform(-1.0, 1.0)).collect()
                } else {
                    let s = learner.actor.act(&histories[i])?;
                    let n = noise[i].sample(&mut explore);
                    s.iter().zip(n).map(|(a, b)| (a + b).clamp(-1.0, 1.0)).collect()
                };
                actions.push(decode_action(&scores, space)?);
                raw.push(scores);
            }
            let windows: Vec<Vec<f64>> = histories.iter().map(|h| learner.actor.pad_window(h)).collect::<Result<_>>()?;
            let report = env.step(&actions)?;
            let next_obs = if report.done { obs.clone() } else { env.observe_all()? };
            for i in 0..learners {
                histories[i].push(next_obs[i].clone());
                if histories[i].len() > config.window {
                    histories[i].remove(0);
                }
                buffer.push(Experience {
                    window: windows[i].clone(),
                    action: raw[i].clone(),
                    reward: report.rewards[i] * config.reward_scale,
                    next_window: learner.actor.pad_window(&histories[i])?,
                    done: report.done,
                });
            }
            obs = next_obs;
            if buffer.len() >= config.batch_size {
                for _ in 0..config.updates_per_step {
                    let TrainStats { critic_loss: c, actor_loss: a, .. } = learner.train_step(&buffer, &mut sample_rng)?;
                    critic_loss += c;
                    actor_loss += a;
                    updates += 1;
                }
            }
        }
        let summary = env.summary().clone();
        let mut row = CurveRow {
            episode,
            episode_return: summary.episode_return,
            served: summary.served,
            lost: summary.lost,
            critic_loss: if updates > 0 { critic_loss / updates as f64 } else { 0.0 },
            actor_loss: if updates > 0 { actor_loss / updates as f64 } else { 0.0 },
            sigma,
            eval_return: None,
        };
        if config.eval_every > 0 && (episode + 1) % config.eval_every == 0 && episode + 1 > config.warmup_episodes {
            let value = evaluate_mean(env, &learner.actor, config)?;
            row.eval_return = Some(value);
            if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                best = Some((value, episode, learner.actor.clone()));
            }
        }
        curve.push(row);
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_every > 0 && (episode + 1) % config.checkpoint_every == 0 {
                DdpgPolicy::new(learner.actor.clone(), space)?.save(&dir.join(format!("episode_{:05}", episode + 1)))?;
            }
        }
        if episode >= config.warmup_episodes {
            sigma = (sigma * config.sigma_decay).max(config.sigma_min);
        }
    }

    let (actor, best_episode) = match best {
        Some((_, ep, actor)) => (actor, Some(ep)),
        None => (learner.actor.clone(), None),
    };
    Ok(TrainOutcome {
        policy: DdpgPolicy::new(actor, space)?,
        curve,
        learner,
        best_episode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Controlled;
    use crate::nn::flatten;
    use crate::scenario::ScenarioFile;

    fn small() -> TrainConfig {
        TrainConfig {
            episodes: 6,
            batch_size: 4,
            buffer_capacity: 100,
            actor_hidden: 6,
            critic_hidden: 8,
            window: 3,
            ..Default::default()
        }
    }

    fn env(name: &str, c: Controlled) -> SimEnv {
        SimEnv::new(&ScenarioFile::bundled(name).unwrap().unwrap(), c).unwrap()
    }

    #[test]
    fn zero_episodes_returns_initial_actor() {
        let cfg = TrainConfig { episodes: 0, ..small() };
        let mut e = env("fig1a", Controlled::Bike);
        let out = train(&mut e, &cfg, None).unwrap();
        assert!(out.curve.is_empty());
        let mut rng = Rng64::new(cfg.seed);
        let fresh = ActorNet::new(e.observation_len(), 6, 4, 3, &mut rng);
        assert_eq!(flatten(&out.policy.actor), flatten(&fresh));
    }

    #[test]
    fn same_seed_same_curve() {
        let cfg = small();
        let a = train(&mut env("tidal5", Controlled::Bike), &cfg, None).unwrap();
        let b = train(&mut env("tidal5", Controlled::Bike), &cfg, None).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(flatten(&a.policy.actor), flatten(&b.policy.actor));
    }

    #[test]
    fn trains_buses_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            checkpoint_every: 3,
            eval_every: 3,
            eval_episodes: 1,
            ..small()
        };
        let mut e = env("busline", Controlled::Bus);
        let out = train(&mut e, &cfg, Some(dir.path())).unwrap();
        assert_eq!(out.curve.len(), 6);
        assert!(out.curve.iter().any(|r| r.eval_return.is_some()));
        assert!(out.best_episode.is_some());
        let loaded = DdpgPolicy::load(&dir.path().join("episode_00006"), e.action_space()).unwrap();
        assert_eq!(loaded.meta(), out.policy.meta());
        write_curve_csv(&dir.path().join("curve.csv"), &out.curve).unwrap();
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = TrainConfig { batch_size: 0, ..small() };
        assert!(train(&mut env("fig1a", Controlled::Bike), &cfg, None).unwrap_err().is_validation());
        let cfg = TrainConfig { tau: 2.0, ..small() };
        assert!(train(&mut env("fig1a", Controlled::Bike), &cfg, None).is_err());
    }
}
