use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::nets::{ActorNet, CriticNet};
use super::replay::{Experience, ReplayBuffer};
use crate::error::{Error, Result};
use crate::nn::{flatten, global_norm, Optimizer, OptimizerConfig, ParamSet};
use crate::rng::Rng64;

/// `target <- tau * online + (1 - tau) * target`, element-wise.
pub fn soft_update<P: ParamSet + ?Sized>(target: &mut P, online: &P, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::validation("tau", format!("{tau} outside [0, 1]")));
    }
    let src = flatten(online);
    let mut shapes_ok = true;
    let mut k = 0;
    target.visit_mut(&mut |_, d| {
        if k + d.len() > src.len() {
            shapes_ok = false;
            return;
        }
        for v in d.iter_mut() {
            *v = tau * src[k] + (1.0 - tau) * *v;
            k += 1;
        }
    });
    if !shapes_ok || k != src.len() {
        return Err(Error::shape("soft update", src.len(), k));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub discount: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub critic_loss: f64,
    /// Negative mean critic value of the actor's actions.
    pub actor_loss: f64,
    pub critic_grad_norm: f64,
    pub actor_grad_norm: f64,
}

/// Online and target actor/critic pairs with their optimizers.
#[derive(Debug, Clone)]
pub struct Ddpg {
    pub actor: ActorNet,
    pub critic: CriticNet,
    pub actor_target: ActorNet,
    pub critic_target: CriticNet,
    pub config: LearnerConfig,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
}

fn batch_obs(windows: &[&[f64]], obs_len: usize) -> Array2<f64> {
    Array2::from_shape_fn((windows.len(), obs_len), |(b, j)| windows[b][windows[b].len() - obs_len + j])
}

impl Ddpg {
    pub fn new(actor: ActorNet, critic: CriticNet, config: LearnerConfig) -> Result<Self> {
        if critic.obs_len != actor.obs_len() || critic.action_len() != actor.score_len() {
            return Err(Error::shape("critic input", actor.obs_len() + actor.score_len(), critic.mlp.input_size()));
        }
        if !(0.0..=1.0).contains(&config.discount) {
            return Err(Error::validation("discount", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&config.tau) {
            return Err(Error::validation("tau", "must lie in [0, 1]"));
        }
        let opt = |lr: f64| {
            let c = OptimizerConfig::adam(lr);
            match config.clip_norm {
                Some(clip) => c.with_clip(clip),
                None => c,
            }
        };
        Ok(Ddpg {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_opt: Optimizer::new(opt(config.actor_lr)),
            critic_opt: Optimizer::new(opt(config.critic_lr)),
            config,
        })
    }

    /// Critic regression targets `r + discount * Q'(s', mu'(s'))`, with no
    /// bootstrap on terminal transitions.
    pub fn targets(&self, batch: &[&Experience]) -> Result<Vec<f64>> {
        let next: Vec<&[f64]> = batch.iter().map(|e| e.next_window.as_slice()).collect();
        let (next_actions, _) = self.actor_target.forward(&next)?;
        let q_next = self.critic_target.value(&batch_obs(&next, self.critic.obs_len), &next_actions)?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let boot = if e.done { 0.0 } else { self.config.discount * q_next[[k, 0]] };
                e.reward + boot
            })
            .collect())
    }

    /// One critic step, one actor step, then both soft updates.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, rng: &mut Rng64) -> Result<TrainStats> {
        let batch = buffer.sample(self.config.batch_size, rng)?;
        self.train_on(&batch)
    }

    pub fn train_on(&mut self, batch: &[&Experience]) -> Result<TrainStats> {
        let b = batch.len();
        let y = self.targets(batch)?;
        let windows: Vec<&[f64]> = batch.iter().map(|e| e.window.as_slice()).collect();
        let obs = batch_obs(&windows, self.critic.obs_len);
        let a_len = self.critic.action_len();
        let mut actions = Array2::zeros((b, a_len));
        for (k, e) in batch.iter().enumerate() {
            if e.action.len() != a_len {
                return Err(Error::shape("stored action", a_len, e.action.len()));
            }
            actions.row_mut(k).assign(&ndarray::ArrayView1::from(&e.action));
        }

        let (q, tape) = self.critic.forward(&obs, &actions)?;
        let mut dq = Array2::zeros((b, 1));
        let mut critic_loss = 0.0;
        for k in 0..b {
            let err = q[[k, 0]] - y[k];
            critic_loss += err * err / b as f64;
            dq[[k, 0]] = 2.0 * err / b as f64;
        }
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite("critic loss".into()));
        }
        let (critic_grads, _) = self.critic.backward(&tape, &dq)?;
        let critic_grad_norm = global_norm(&critic_grads);
        self.critic_opt.step(&mut self.critic, &critic_grads)?;

        let (pi, actor_tape) = self.actor.forward(&windows)?;
        let (q_pi, tape) = self.critic.forward(&obs, &pi)?;
        let actor_loss = -q_pi.sum() / b as f64;
        let (_, da) = self.critic.backward(&tape, &Array2::from_elem((b, 1), -1.0 / b as f64))?;
        let actor_grads = self.actor.backward(&actor_tape, &da)?;
        let actor_grad_norm = global_norm(&actor_grads);
        self.actor_opt.step(&mut self.actor, &actor_grads)?;

        soft_update(&mut self.critic_target, &self.critic, self.config.tau)?;
        soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;
        Ok(TrainStats {
            critic_loss,
            actor_loss,
            critic_grad_norm,
            actor_grad_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::fill;
    use proptest::prelude::*;

    fn nets(seed: u64) -> (ActorNet, CriticNet) {
        let mut rng = Rng64::new(seed);
        (ActorNet::new(3, 6, 2, 2, &mut rng), CriticNet::new(3, 2, 8, &mut rng))
    }

    fn config(discount: f64) -> LearnerConfig {
        LearnerConfig {
            discount,
            tau: 0.05,
            batch_size: 4,
            actor_lr: 1e-3,
            critic_lr: 1e-2,
            clip_norm: Some(10.0),
        }
    }

    fn transition(reward: f64, done: bool) -> Experience {
        Experience {
            window: vec![0.0, 0.0, 0.0, 0.2, -0.4, 0.6],
            action: vec![0.1, -0.3],
            reward,
            next_window: vec![0.2, -0.4, 0.6, 0.5, 0.5, 0.5],
            done,
        }
    }

    #[test]
    fn soft_update_examples() {
        let (a, _) = nets(0);
        let mut t = a.clone();
        fill(&mut t, 2.0);
        let mut online = a.clone();
        fill(&mut online, 4.0);
        let before = t.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, before);
        soft_update(&mut t, &online, 0.5).unwrap();
        assert!(flatten(&t).iter().all(|&v| v == 3.0));
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(flatten(&t), flatten(&online));
        assert!(soft_update(&mut t, &online, 1.5).unwrap_err().is_validation());
        let wider = ActorNet::new(3, 7, 2, 2, &mut Rng64::new(0));
        assert!(soft_update(&mut t, &wider, 0.5).is_err());
    }

    #[test]
    fn zero_rewards_and_discount_give_zero_targets() {
        let (a, c) = nets(1);
        let d = Ddpg::new(a, c, config(0.0)).unwrap();
        let batch = [transition(0.0, false), transition(0.0, true)];
        let refs: Vec<&Experience> = batch.iter().collect();
        assert_eq!(d.targets(&refs).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn terminal_transitions_do_not_bootstrap() {
        let (a, c) = nets(2);
        let d = Ddpg::new(a, c, config(0.9)).unwrap();
        let batch = [transition(1.5, true), transition(1.5, false)];
        let refs: Vec<&Experience> = batch.iter().collect();
        let y = d.targets(&refs).unwrap();
        assert_eq!(y[0], 1.5);
        let next: Vec<&[f64]> = vec![&batch[1].next_window];
        let (na, _) = d.actor_target.forward(&next).unwrap();
        let q = d.critic_target.value(&batch_obs(&next, 3), &na).unwrap()[[0, 0]];
        assert!((y[1] - (1.5 + 0.9 * q)).abs() < 1e-12);
    }

    #[test]
    fn repeated_transition_value_converges_to_reward() {
        let (a, c) = nets(3);
        let mut d = Ddpg::new(a, c, config(0.99)).unwrap();
        let mut buf = ReplayBuffer::new(8).unwrap();
        for _ in 0..8 {
            buf.push(transition(0.7, true));
        }
        let mut rng = Rng64::new(0);
        for _ in 0..600 {
            d.train_step(&buf, &mut rng).unwrap();
        }
        let e = transition(0.7, true);
        let obs = batch_obs(&[e.window.as_slice()], 3);
        let act = Array2::from_shape_vec((1, 2), e.action.clone()).unwrap();
        let q = d.critic.value(&obs, &act).unwrap()[[0, 0]];
        assert!((q - 0.7).abs() < 1e-2, "{q}");
    }

    #[test]
    fn insufficient_buffer() {
        let (a, c) = nets(4);
        let mut d = Ddpg::new(a, c, config(0.9)).unwrap();
        let mut buf = ReplayBuffer::new(8).unwrap();
        buf.push(transition(0.0, true));
        let err = d.train_step(&buf, &mut Rng64::new(0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientBuffer { have: 1, need: 4 }));
    }

    #[test]
    fn actor_step_raises_critic_value() {
        let (a, c) = nets(5);
        let mut d = Ddpg::new(a, c, config(0.0)).unwrap();
        let batch: Vec<Experience> = (0..4).map(|_| transition(0.0, true)).collect();
        let refs: Vec<&Experience> = batch.iter().collect();
        let windows: Vec<&[f64]> = refs.iter().map(|e| e.window.as_slice()).collect();
        let value = |actor: &ActorNet, critic: &CriticNet| {
            let (pi, _) = actor.forward(&windows).unwrap();
            critic.value(&batch_obs(&windows, 3), &pi).unwrap().sum()
        };
        let before = d.actor.clone();
        d.train_on(&refs).unwrap();
        assert!(value(&d.actor, &d.critic) > value(&before, &d.critic));
    }

    proptest! {
        #[test]
        fn soft_update_contracts(tau in 0.0f64..=1.0, seed in 0u64..50) {
            let (mut t, _) = nets(seed);
            let (online, _) = nets(seed + 100);
            let dist = |x: &ActorNet| {
                flatten(x).iter().zip(flatten(&online)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            };
            let mut last = dist(&t);
            for _ in 0..5 {
                soft_update(&mut t, &online, tau).unwrap();
                let now = dist(&t);
                prop_assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }
}
