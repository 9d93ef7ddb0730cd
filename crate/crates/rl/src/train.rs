//! Episode loop: act, step, store, update.
//!
//! A [`Trainer`] owns everything that evolves during training so it can be
//! checkpointed between episodes and resumed with identical results.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddpg::{DdpgAgent, DdpgConfig};
use crate::env::{EnvConfig, EnvState, OutageFn, RelayEnv};
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Transition};
use crate::sac::{LearnStart, LossRecord, SacAgent, SacConfig};

const STREAM_INIT: u64 = 0;
const STREAM_ACT: u64 = 1;
const STREAM_UPDATE: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Sac,
    Ddpg,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Sac => "sac",
            AgentKind::Ddpg => "ddpg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Agent {
    Sac(SacAgent),
    Ddpg(DdpgAgent),
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(kind: AgentKind, sac: &SacConfig, ddpg: &DdpgConfig, rng: &mut R) -> Result<Self> {
        Ok(match kind {
            AgentKind::Sac => Agent::Sac(SacAgent::new(sac.clone(), rng)?),
            AgentKind::Ddpg => Agent::Ddpg(DdpgAgent::new(ddpg.clone(), rng)?),
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Sac(_) => AgentKind::Sac,
            Agent::Ddpg(_) => AgentKind::Ddpg,
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, s: [f64; 2], rng: &mut R) -> Result<[f64; 2]> {
        match self {
            Agent::Sac(a) => a.act(s, rng),
            Agent::Ddpg(a) => a.act(s, rng),
        }
    }

    pub fn greedy(&self, s: [f64; 2]) -> Result<[f64; 2]> {
        match self {
            Agent::Sac(a) => a.greedy(s),
            Agent::Ddpg(a) => a.greedy(s),
        }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<LossRecord> {
        match self {
            Agent::Sac(a) => a.update(buffer, rng),
            Agent::Ddpg(a) => a.update(buffer, rng),
        }
    }

    /// (batch, capacity, warmup, learn_start)
    fn schedule(&self) -> (usize, usize, usize, LearnStart) {
        match self {
            Agent::Sac(a) => (a.config.batch, a.config.capacity, a.config.warmup, a.config.learn_start),
            Agent::Ddpg(a) => (a.config.batch, a.config.capacity, a.config.warmup, a.config.learn_start),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// `false` disables gradient updates; every action is then uniform random.
    pub learn: bool,
    pub start: Option<EnvState>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 300,
            learn: true,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub reward: f64,
    pub final_outage: f64,
    pub final_position: [f64; 2],
    pub updates: usize,
    /// Mean over the episode's updates (zeros when there were none).
    pub losses: LossRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeLog>,
    /// UAV position after every environment step, all episodes concatenated.
    pub positions: Vec<[f64; 2]>,
}

impl TrainLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    pub fn final_outages(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.final_outage).collect()
    }
}

/// Serializable part of a trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub seed: u64,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub act_rng: ChaCha8Rng,
    pub update_rng: ChaCha8Rng,
    pub total_steps: usize,
    pub log: TrainLog,
}

pub struct Trainer {
    state: TrainerState,
    env: RelayEnv,
}

fn uniform_action<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}

impl Trainer {
    pub fn new(
        kind: AgentKind,
        sac: &SacConfig,
        ddpg: &DdpgConfig,
        env: EnvConfig,
        train: TrainConfig,
        outage: Arc<dyn OutageFn>,
        seed: u64,
    ) -> Result<Self> {
        let agent = Agent::new(kind, sac, ddpg, &mut stream_rng(seed, STREAM_INIT))?;
        let (_, capacity, _, _) = agent.schedule();
        let state = TrainerState {
            seed,
            env,
            train,
            buffer: ReplayBuffer::new(capacity)?,
            agent,
            act_rng: stream_rng(seed, STREAM_ACT),
            update_rng: stream_rng(seed, STREAM_UPDATE),
            total_steps: 0,
            log: TrainLog::default(),
        };
        Trainer::from_state(state, outage)
    }

    pub fn from_state(state: TrainerState, outage: Arc<dyn OutageFn>) -> Result<Self> {
        let env = RelayEnv::new(state.env, outage)?;
        if state.log.episodes.len() > state.train.episodes {
            return Err(Error::Checkpoint("log longer than the configured episode count".into()));
        }
        Ok(Trainer { state, env })
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn into_state(self) -> TrainerState {
        self.state
    }

    pub fn agent(&self) -> &Agent {
        &self.state.agent
    }

    pub fn log(&self) -> &TrainLog {
        &self.state.log
    }

    pub fn episodes_done(&self) -> usize {
        self.state.log.episodes.len()
    }

    pub fn is_finished(&self) -> bool {
        self.episodes_done() >= self.state.train.episodes
    }

    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let st = &mut self.state;
        let (batch, _, warmup, learn_start) = st.agent.schedule();
        let mut s = self.env.reset(st.train.start)?;
        let mut total_reward = 0.0;
        let mut sums = LossRecord::default();
        let mut updates = 0;
        let last_outage = loop {
            let sn = st.env.normalize(s);
            let exploring = !st.train.learn || (learn_start == LearnStart::Warmup && st.total_steps < warmup);
            let a = if exploring {
                uniform_action(&mut st.act_rng)
            } else {
                st.agent.act(sn, &mut st.act_rng)?
            };
            let r = self.env.step(st.env.scale_action(a))?;
            st.total_steps += 1;
            total_reward += r.reward;
            st.log.positions.push([r.next_state.n1, r.next_state.n2]);
            st.buffer.push(Transition {
                state: sn,
                action: a,
                reward: r.reward,
                next_state: st.env.normalize(r.next_state),
                done: r.done,
            });
            if st.train.learn && learn_start.ready(&st.buffer, st.total_steps, warmup, batch) {
                let l = st.agent.update(&st.buffer, &mut st.update_rng)?;
                sums.critic += l.critic;
                sums.actor += l.actor;
                sums.temperature += l.temperature;
                sums.alpha += l.alpha;
                updates += 1;
            }
            s = r.next_state;
            if r.done {
                break r.outage_sum;
            }
        };
        if updates > 0 {
            let k = updates as f64;
            sums = LossRecord {
                critic: sums.critic / k,
                actor: sums.actor / k,
                temperature: sums.temperature / k,
                alpha: sums.alpha / k,
            };
        }
        let ep = EpisodeLog {
            reward: total_reward,
            final_outage: last_outage,
            final_position: [s.n1, s.n2],
            updates,
            losses: sums,
        };
        st.log.episodes.push(ep);
        log::debug!(
            "{} episode {}: reward {:.6e}, final outage {:.5}",
            st.agent.kind(),
            st.log.episodes.len(),
            ep.reward,
            ep.final_outage
        );
        Ok(ep)
    }

    pub fn run(&mut self) -> Result<&TrainLog> {
        while !self.is_finished() {
            self.run_episode()?;
        }
        Ok(&self.state.log)
    }

    /// Deterministic rollout of the current policy from the configured start.
    pub fn greedy_rollout(&self) -> Result<Vec<crate::env::StepResult>> {
        greedy_rollout(&self.state.agent, &self.env, self.state.train.start)
    }
}

/// Roll out `agent`'s greedy policy for one horizon without touching any
/// trainer state.
pub fn greedy_rollout(agent: &Agent, env: &RelayEnv, start: Option<EnvState>) -> Result<Vec<crate::env::StepResult>> {
    let cfg = env.config;
    let mut s = start.unwrap_or(EnvState { n1: 0.0, n2: 0.0 });
    if !cfg.area.contains(s) {
        return Err(Error::OutOfArea { x: s.n1, y: s.n2 });
    }
    let mut out = Vec::with_capacity(cfg.horizon);
    for t in 1..=cfg.horizon {
        let a = agent.greedy(cfg.normalize(s))?;
        let (next, reward, outage_sum) = env.transition(s, cfg.scale_action(a))?;
        out.push(crate::env::StepResult {
            next_state: next,
            reward,
            outage_sum,
            done: t == cfg.horizon,
        });
        s = next;
    }
    Ok(out)
}
