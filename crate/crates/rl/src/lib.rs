//! Relay placement as a reinforcement-learning problem.
//!
//! [`env`] wraps the outage model as a deterministic MDP over UAV positions.
//! [`sac`] and [`ddpg`] are the two agents, built on the small networks in
//! [`mlp`] with gradients from [`losses`]. [`train`] runs episodes and
//! [`checkpoint`] saves and restores a run mid-way.

pub mod adam;
pub mod checkpoint;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod losses;
pub mod mlp;
pub mod policy;
pub mod replay;
pub mod sac;
pub mod train;

pub use ddpg::{DdpgAgent, DdpgConfig};
pub use env::{Area, ClosedFormOutage, EnvAction, EnvConfig, EnvState, GridCache, OutageFn, RelayEnv, StepResult};
pub use error::{Error, Result};
pub use mlp::Mlp;
pub use replay::{ReplayBuffer, Transition};
pub use sac::{LearnStart, LossRecord, SacAgent, SacConfig};
pub use train::{greedy_rollout, Agent, AgentKind, EpisodeLog, TrainConfig, TrainLog, Trainer, TrainerState};
