//! Deterministic policy gradient baseline.

use ndarray::ArrayView2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::losses::{ddpg_actor_loss, ddpg_critic_loss, ddpg_critic_target};
use crate::mlp::Mlp;
use crate::replay::{Batch, ReplayBuffer};
use crate::sac::{check_common, LearnStart, LossRecord, ACTION_DIM, STATE_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgConfig {
    pub lr_q: f64,
    pub lr_pi: f64,
    pub discount: f64,
    pub batch: usize,
    pub capacity: usize,
    pub tau: f64,
    pub hidden: Vec<usize>,
    pub warmup: usize,
    pub learn_start: LearnStart,
    /// Std of the Gaussian exploration noise in normalized action units,
    /// where the action range `[-1, 1]` has width 2.
    pub noise_std: f64,
    pub reward_scale: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            lr_q: 0.003,
            lr_pi: 0.001,
            discount: 0.9,
            batch: 128,
            capacity: 10_000,
            tau: 0.005,
            hidden: vec![128, 128],
            warmup: 500,
            learn_start: LearnStart::Warmup,
            noise_std: 0.2,
            reward_scale: 1000.0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(
            &[self.lr_q, self.lr_pi],
            self.discount,
            self.tau,
            self.batch,
            self.capacity,
            &self.hidden,
            self.reward_scale,
        )?;
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be non-negative".into()));
        }
        Ok(())
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgAgent {
    pub config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    opt_actor: Adam,
    opt_critic: Adam,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(config: DdpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let actor = Mlp::new(&config.sizes(STATE_DIM, ACTION_DIM), rng)?;
        let critic = Mlp::new(&config.sizes(STATE_DIM + ACTION_DIM, 1), rng)?;
        Ok(DdpgAgent {
            opt_actor: Adam::new(AdamConfig::with_lr(config.lr_pi), &actor),
            opt_critic: Adam::new(AdamConfig::with_lr(config.lr_q), &critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
        })
    }

    pub fn greedy(&self, state: [f64; 2]) -> Result<[f64; 2]> {
        let out = self
            .actor
            .forward(ArrayView2::from_shape((1, 2), &state).expect("row"))?;
        Ok([out[[0, 0]].tanh(), out[[0, 1]].tanh()])
    }

    /// Greedy action plus clipped Gaussian noise. With `noise_std == 0` no
    /// randomness is consumed.
    pub fn act<R: Rng + ?Sized>(&self, state: [f64; 2], rng: &mut R) -> Result<[f64; 2]> {
        let mut a = self.greedy(state)?;
        if self.config.noise_std > 0.0 {
            let noise = Normal::new(0.0, self.config.noise_std).expect("validated std");
            for v in &mut a {
                *v = (*v + noise.sample(rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<LossRecord> {
        let batch = buffer.sample(self.config.batch, rng)?;
        self.update_on(&batch)
    }

    pub fn update_on(&mut self, batch: &Batch) -> Result<LossRecord> {
        let c = &self.config;
        let y = ddpg_critic_target(
            &self.target_actor,
            &self.target_critic,
            c.discount,
            c.reward_scale,
            batch,
        )?;
        let (lq, gq) = ddpg_critic_loss(&self.critic, batch, &y)?;
        self.opt_critic.step(&mut self.critic, &gq);
        let (la, ga) = ddpg_actor_loss(&self.actor, &self.critic, batch.states.view())?;
        self.opt_actor.step(&mut self.actor, &ga);
        let tau = c.tau;
        self.target_critic.soft_update(&self.critic, tau);
        self.target_actor.soft_update(&self.actor, tau);
        Ok(LossRecord {
            critic: lq,
            actor: la,
            temperature: 0.0,
            alpha: 0.0,
        })
    }
}
