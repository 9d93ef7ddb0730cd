//! JSON checkpoints of a [`TrainerState`].
//!
//! Floats are written with round-trip precision, so a reloaded trainer
//! continues exactly where the saved one would have.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::TrainerState;

pub const FORMAT: &str = "lfrelay-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    state: TrainerState,
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    format: &'a str,
    version: u32,
    state: &'a TrainerState,
}

pub fn to_writer<W: Write>(w: W, state: &TrainerState) -> Result<()> {
    serde_json::to_writer(
        w,
        &EnvelopeRef {
            format: FORMAT,
            version: VERSION,
            state,
        },
    )
    .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn to_bytes(state: &TrainerState) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    to_writer(&mut out, state)?;
    Ok(out)
}

pub fn from_slice(bytes: &[u8]) -> Result<TrainerState> {
    let env: Envelope = serde_json::from_slice(bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if env.format != FORMAT {
        return Err(Error::Checkpoint(format!("not a checkpoint (format {:?})", env.format)));
    }
    if env.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            env.version
        )));
    }
    validate(&env.state)?;
    Ok(env.state)
}

pub fn from_reader<R: Read>(mut r: R) -> Result<TrainerState> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::Checkpoint(e.to_string()))?;
    from_slice(&buf)
}

/// Structural checks a deserializer cannot express.
fn validate(s: &TrainerState) -> Result<()> {
    use crate::train::Agent;
    s.env.validate()?;
    let bad = |what: &str| Err(Error::Checkpoint(format!("inconsistent {what}")));
    let nets_ok = |nets: &[&crate::mlp::Mlp], input: usize, output: usize| {
        nets.iter().all(|n| {
            !n.layers.is_empty()
                && n.input_dim() == input
                && n.output_dim() == output
                && n.layers.windows(2).all(|w| w[0].w.nrows() == w[1].w.ncols())
                && n.layers.iter().all(|l| l.b.len() == l.w.nrows())
                && n.is_finite()
        })
    };
    match &s.agent {
        Agent::Sac(a) => {
            a.config.validate()?;
            let critics: Vec<_> = a.critics.iter().chain(&a.targets).collect();
            if a.critics.len() != if a.config.twin { 2 } else { 1 } || a.targets.len() != a.critics.len() {
                return bad("critic count");
            }
            if !nets_ok(&[&a.policy], 2, 4) || !nets_ok(&critics, 4, 1) || !a.log_alpha.is_finite() {
                return bad("network shapes");
            }
            if a.critics.iter().zip(&a.targets).any(|(c, t)| c.sizes() != t.sizes()) {
                return bad("target shapes");
            }
        }
        Agent::Ddpg(a) => {
            a.config.validate()?;
            if !nets_ok(&[&a.actor, &a.target_actor], 2, 2) || !nets_ok(&[&a.critic, &a.target_critic], 4, 1) {
                return bad("network shapes");
            }
        }
    }
    if s.buffer.capacity() == 0 || s.buffer.len() > s.buffer.capacity() {
        return bad("replay buffer");
    }
    if s.log.episodes.len() > s.train.episodes {
        return bad("log length");
    }
    Ok(())
}
