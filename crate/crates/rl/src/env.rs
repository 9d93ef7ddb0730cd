//! Relay-placement MDP: the state is the UAV's horizontal position, an action
//! is a bounded displacement, and the reward is inversely proportional to the
//! system outage at the position the UAV moves to.

use std::sync::Arc;

use lfrelay_core::{QuadratureConfig, SystemModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvState {
    pub n1: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvAction {
    pub dn1: f64,
    pub dn2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Area {
    pub fn contains(&self, s: EnvState) -> bool {
        (self.min[0]..=self.max[0]).contains(&s.n1) && (self.min[1]..=self.max[1]).contains(&s.n2)
    }

    pub fn clamp(&self, s: EnvState) -> EnvState {
        EnvState {
            n1: s.n1.clamp(self.min[0], self.max[0]),
            n2: s.n2.clamp(self.min[1], self.max[1]),
        }
    }

    pub fn center(&self) -> EnvState {
        EnvState {
            n1: 0.5 * (self.min[0] + self.max[0]),
            n2: 0.5 * (self.min[1] + self.max[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub area: Area,
    pub altitude: f64,
    /// Largest displacement per axis per step, meters.
    pub max_step: f64,
    pub horizon: usize,
    pub mu: f64,
    pub eps_guard: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            area: Area {
                min: [0.0, 0.0],
                max: [20_000.0, 20_000.0],
            },
            altitude: 500.0,
            max_step: 500.0,
            horizon: 100,
            mu: 5000.0,
            eps_guard: 1e-12,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.area;
        if !(a.max[0] > a.min[0] && a.max[1] > a.min[1]) || a.min.iter().chain(&a.max).any(|v| !v.is_finite()) {
            return Err(Error::Config("area must be a non-empty finite box".into()));
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config("mu must be positive".into()));
        }
        if !(self.eps_guard > 0.0) {
            return Err(Error::Config("eps_guard must be positive".into()));
        }
        if !(self.altitude > 0.0) {
            return Err(Error::Config("altitude must be positive".into()));
        }
        Ok(())
    }

    /// Affine map of the area onto `[-1, 1]^2`.
    pub fn normalize(&self, s: EnvState) -> [f64; 2] {
        let a = &self.area;
        [
            2.0 * (s.n1 - a.min[0]) / (a.max[0] - a.min[0]) - 1.0,
            2.0 * (s.n2 - a.min[1]) / (a.max[1] - a.min[1]) - 1.0,
        ]
    }

    pub fn denormalize(&self, u: [f64; 2]) -> EnvState {
        let a = &self.area;
        EnvState {
            n1: a.min[0] + 0.5 * (u[0] + 1.0) * (a.max[0] - a.min[0]),
            n2: a.min[1] + 0.5 * (u[1] + 1.0) * (a.max[1] - a.min[1]),
        }
    }

    /// Scale a network action in `[-1, 1]^2` to meters.
    pub fn scale_action(&self, a: [f64; 2]) -> EnvAction {
        EnvAction {
            dn1: a[0].clamp(-1.0, 1.0) * self.max_step,
            dn2: a[1].clamp(-1.0, 1.0) * self.max_step,
        }
    }

    pub fn reward(&self, num_users: usize, outage_sum: f64) -> f64 {
        num_users as f64 / (self.mu * outage_sum.max(self.eps_guard))
    }
}

/// System outage as a function of the UAV's horizontal position.
pub trait OutageFn: Send + Sync {
    fn num_users(&self) -> usize;
    fn outage_sum(&self, n1: f64, n2: f64) -> Result<f64>;
}

/// Closed-form outage evaluated at every query.
#[derive(Debug, Clone)]
pub struct ClosedFormOutage {
    pub model: SystemModel,
    pub quad: QuadratureConfig,
}

impl ClosedFormOutage {
    pub fn new(model: SystemModel, quad: QuadratureConfig) -> Result<Self> {
        model.validate()?;
        quad.validate()?;
        Ok(ClosedFormOutage { model, quad })
    }
}

impl OutageFn for ClosedFormOutage {
    fn num_users(&self) -> usize {
        self.model.num_users()
    }

    fn outage_sum(&self, n1: f64, n2: f64) -> Result<f64> {
        Ok(self.model.outage_at_with(n1, n2, &self.quad)?.sum)
    }
}

/// Bilinear interpolation over a precomputed lattice of outage sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCache {
    area: Area,
    n: usize,
    users: usize,
    values: Vec<f64>,
}

impl GridCache {
    pub fn build(f: &dyn OutageFn, area: Area, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("grid cache needs at least 2 points per axis".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = lattice_point(&area, n, i, j);
                values.push(f.outage_sum(x, y)?);
            }
        }
        Ok(GridCache {
            area,
            n,
            users: f.num_users(),
            values,
        })
    }
}

fn lattice_point(area: &Area, n: usize, i: usize, j: usize) -> (f64, f64) {
    let t = |k: usize, axis: usize| area.min[axis] + (area.max[axis] - area.min[axis]) * k as f64 / (n - 1) as f64;
    (t(i, 0), t(j, 1))
}

impl OutageFn for GridCache {
    fn num_users(&self) -> usize {
        self.users
    }

    fn outage_sum(&self, n1: f64, n2: f64) -> Result<f64> {
        let a = &self.area;
        let last = (self.n - 1) as f64;
        let u = ((n1 - a.min[0]) / (a.max[0] - a.min[0]) * last).clamp(0.0, last);
        let v = ((n2 - a.min[1]) / (a.max[1] - a.min[1]) * last).clamp(0.0, last);
        let (i, j) = (
            (u.floor() as usize).min(self.n - 2),
            (v.floor() as usize).min(self.n - 2),
        );
        let (fu, fv) = (u - i as f64, v - j as f64);
        let at = |i: usize, j: usize| self.values[i * self.n + j];
        Ok((1.0 - fu) * (1.0 - fv) * at(i, j)
            + fu * (1.0 - fv) * at(i + 1, j)
            + (1.0 - fu) * fv * at(i, j + 1)
            + fu * fv * at(i + 1, j + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub outage_sum: f64,
    pub done: bool,
}

pub struct RelayEnv {
    pub config: EnvConfig,
    outage: Arc<dyn OutageFn>,
    state: EnvState,
    t: usize,
}

impl RelayEnv {
    pub fn new(config: EnvConfig, outage: Arc<dyn OutageFn>) -> Result<Self> {
        config.validate()?;
        let start = EnvState {
            n1: config.area.min[0].max(0.0).min(config.area.max[0]),
            n2: config.area.min[1].max(0.0).min(config.area.max[1]),
        };
        Ok(RelayEnv {
            config,
            outage,
            state: start,
            t: 0,
        })
    }

    pub fn num_users(&self) -> usize {
        self.outage.num_users()
    }

    pub fn outage_fn(&self) -> &Arc<dyn OutageFn> {
        &self.outage
    }

    pub fn state(&self) -> EnvState {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Place the UAV at `start`, or over the BS at the origin by default.
    pub fn reset(&mut self, start: Option<EnvState>) -> Result<EnvState> {
        let s = start.unwrap_or(EnvState { n1: 0.0, n2: 0.0 });
        if !self.config.area.contains(s) {
            return Err(Error::OutOfArea { x: s.n1, y: s.n2 });
        }
        self.state = s;
        self.t = 0;
        Ok(s)
    }

    /// Pure transition: where `action` takes the UAV from `state` and what
    /// reward that position earns. Out-of-range actions are clipped per axis.
    pub fn transition(&self, state: EnvState, action: EnvAction) -> Result<(EnvState, f64, f64)> {
        let lim = self.config.max_step;
        let (d1, d2) = (action.dn1.clamp(-lim, lim), action.dn2.clamp(-lim, lim));
        if d1 != action.dn1 || d2 != action.dn2 {
            log::trace!("clipped action ({}, {}) to ({d1}, {d2})", action.dn1, action.dn2);
        }
        let next = self.config.area.clamp(EnvState {
            n1: state.n1 + d1,
            n2: state.n2 + d2,
        });
        let outage = self.outage.outage_sum(next.n1, next.n2)?;
        Ok((next, self.config.reward(self.num_users(), outage), outage))
    }

    pub fn step(&mut self, action: EnvAction) -> Result<StepResult> {
        let (next, reward, outage_sum) = self.transition(self.state, action)?;
        self.state = next;
        self.t += 1;
        Ok(StepResult {
            next_state: next,
            reward,
            outage_sum,
            done: self.t >= self.config.horizon,
        })
    }
}
