//! Soft actor-critic with twin critics and a learned temperature.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig, ScalarAdam};
use crate::error::{Error, Result};
use crate::losses::{sac_critic_loss, sac_critic_target, sac_greedy, sac_policy_loss, temperature_loss};
use crate::mlp::Mlp;
use crate::policy::{squash, standard_normal};
use crate::replay::{Batch, ReplayBuffer};

pub const STATE_DIM: usize = 2;
pub const ACTION_DIM: usize = 2;

/// When gradient updates start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearnStart {
    /// After `warmup` uniformly random steps (and at least one batch stored).
    #[default]
    Warmup,
    /// Only once the replay buffer has reached capacity.
    BufferFull,
}

impl LearnStart {
    pub fn ready(self, buffer: &ReplayBuffer, total_steps: usize, warmup: usize, batch: usize) -> bool {
        match self {
            LearnStart::Warmup => total_steps >= warmup && buffer.len() >= batch,
            LearnStart::BufferFull => buffer.is_full() && buffer.len() >= batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub lr_q: f64,
    pub lr_pi: f64,
    pub lr_alpha: f64,
    pub discount: f64,
    pub batch: usize,
    pub capacity: usize,
    pub tau: f64,
    pub alpha0: f64,
    pub entropy_target: f64,
    pub hidden: Vec<usize>,
    pub warmup: usize,
    pub learn_start: LearnStart,
    /// Two critics with a min-target; `false` trains a single critic.
    pub twin: bool,
    /// Multiplier on environment rewards inside the critic target.
    pub reward_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            lr_q: 0.003,
            lr_pi: 0.001,
            lr_alpha: 0.0003,
            discount: 0.9,
            batch: 128,
            capacity: 10_000,
            tau: 0.005,
            alpha0: 0.2,
            entropy_target: -(ACTION_DIM as f64),
            hidden: vec![128, 128],
            warmup: 500,
            learn_start: LearnStart::Warmup,
            twin: true,
            reward_scale: 1000.0,
        }
    }
}

pub(crate) fn check_common(
    lrs: &[f64],
    discount: f64,
    tau: f64,
    batch: usize,
    capacity: usize,
    hidden: &[usize],
    reward_scale: f64,
) -> Result<()> {
    if lrs.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Config("learning rates must be positive".into()));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::Config("discount must lie in (0, 1)".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config("tau must lie in (0, 1]".into()));
    }
    if batch == 0 || capacity < batch {
        return Err(Error::Config("need 0 < batch <= capacity".into()));
    }
    if hidden.is_empty() || hidden.contains(&0) {
        return Err(Error::Config("hidden layer sizes must be positive".into()));
    }
    if !(reward_scale > 0.0 && reward_scale.is_finite()) {
        return Err(Error::Config("reward_scale must be positive".into()));
    }
    Ok(())
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(
            &[self.lr_q, self.lr_pi, self.lr_alpha],
            self.discount,
            self.tau,
            self.batch,
            self.capacity,
            &self.hidden,
            self.reward_scale,
        )?;
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::Config("alpha0 must be positive".into()));
        }
        if !self.entropy_target.is_finite() {
            return Err(Error::Config("entropy_target must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossRecord {
    pub critic: f64,
    pub actor: f64,
    pub temperature: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacAgent {
    pub config: SacConfig,
    pub policy: Mlp,
    pub critics: Vec<Mlp>,
    pub targets: Vec<Mlp>,
    pub log_alpha: f64,
    opt_pi: Adam,
    opt_q: Vec<Adam>,
    opt_alpha: ScalarAdam,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(config: SacConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let policy = Mlp::new(&config.sizes(STATE_DIM, 2 * ACTION_DIM), rng)?;
        let n_critics = if config.twin { 2 } else { 1 };
        let critics = (0..n_critics)
            .map(|_| Mlp::new(&config.sizes(STATE_DIM + ACTION_DIM, 1), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(SacAgent {
            opt_pi: Adam::new(AdamConfig::with_lr(config.lr_pi), &policy),
            opt_q: critics
                .iter()
                .map(|c| Adam::new(AdamConfig::with_lr(config.lr_q), c))
                .collect(),
            opt_alpha: ScalarAdam::new(AdamConfig::with_lr(config.lr_alpha)),
            targets: critics.clone(),
            log_alpha: config.alpha0.ln(),
            policy,
            critics,
            config,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn act<R: Rng + ?Sized>(&self, state: [f64; 2], rng: &mut R) -> Result<[f64; 2]> {
        let s = ArrayView2::from_shape((1, 2), &state).expect("row");
        let out = self.policy.forward(s)?;
        let sq = squash(out.view(), &standard_normal(rng, 1, ACTION_DIM));
        Ok([sq.action[[0, 0]], sq.action[[0, 1]]])
    }

    pub fn greedy(&self, state: [f64; 2]) -> Result<[f64; 2]> {
        let s = ArrayView2::from_shape((1, 2), &state).expect("row");
        let a = sac_greedy(&self.policy, s)?;
        Ok([a[[0, 0]], a[[0, 1]]])
    }

    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<LossRecord> {
        let batch = buffer.sample(self.config.batch, rng)?;
        self.update_on(&batch, rng)
    }

    /// Soft Bellman target for `batch`, bootstrapped from the target critics.
    pub fn critic_target(&self, batch: &Batch, eps_next: &Array2<f64>) -> Result<Array1<f64>> {
        let c = &self.config;
        sac_critic_target(
            &self.policy,
            &self.targets,
            self.alpha(),
            c.discount,
            c.reward_scale,
            batch,
            eps_next,
        )
    }

    pub fn update_on<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<LossRecord> {
        let alpha = self.alpha();
        let eps_next = standard_normal(rng, batch.len(), ACTION_DIM);
        let y = self.critic_target(batch, &eps_next)?;
        let c = &self.config;

        let mut critic_loss = 0.0;
        for (net, opt) in self.critics.iter_mut().zip(&mut self.opt_q) {
            let (l, g) = sac_critic_loss(net, batch, &y)?;
            opt.step(net, &g);
            critic_loss += l;
        }
        critic_loss /= self.critics.len() as f64;

        let eps = standard_normal(rng, batch.len(), ACTION_DIM);
        let pl = sac_policy_loss(&self.policy, &self.critics, alpha, batch.states.view(), &eps)?;
        self.opt_pi.step(&mut self.policy, &pl.grads);

        let (tl, g_alpha) = temperature_loss(self.log_alpha, &pl.log_prob, c.entropy_target);
        self.opt_alpha.step(&mut self.log_alpha, g_alpha);

        let tau = c.tau;
        for (t, net) in self.targets.iter_mut().zip(&self.critics) {
            t.soft_update(net, tau);
        }
        Ok(LossRecord {
            critic: critic_loss,
            actor: pl.loss,
            temperature: tl,
            alpha: self.alpha(),
        })
    }
}
