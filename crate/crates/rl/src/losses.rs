//! The five training losses and their exact gradients.
//!
//! Every function returns the batch-mean loss together with the gradient
//! with respect to the parameters being trained; targets are treated as
//! constants.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};

use crate::error::Result;
use crate::mlp::{Grads, Mlp};
use crate::policy::{deterministic, squash, squash_backward};
use crate::replay::Batch;

pub(crate) fn critic_input(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[states, actions]).expect("same row count")
}

fn column(a: Array2<f64>) -> Array1<f64> {
    a.column(0).to_owned()
}

/// Elementwise minimum over the critics.
fn min_q(critics: &[Mlp], x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let mut out: Option<Array1<f64>> = None;
    for c in critics {
        let q = column(c.forward(x)?);
        out = Some(match out {
            None => q,
            Some(m) => ndarray::Zip::from(&m).and(&q).map_collect(|&a, &b| a.min(b)),
        });
    }
    Ok(out.expect("at least one critic"))
}

/// `scale * r + discount * (1 - done) * (min_k Qbar_k(s', a') - alpha * log pi(a'|s'))`
/// with `a' ~ pi(.|s')` drawn through `eps_next`.
pub fn sac_critic_target(
    policy: &Mlp,
    target_critics: &[Mlp],
    alpha: f64,
    discount: f64,
    reward_scale: f64,
    batch: &Batch,
    eps_next: &Array2<f64>,
) -> Result<Array1<f64>> {
    let out = policy.forward(batch.next_states.view())?;
    let sq = squash(out.view(), eps_next);
    let x = critic_input(batch.next_states.view(), sq.action.view());
    let q = min_q(target_critics, x.view())?;
    let soft = q - &(sq.log_prob * alpha);
    Ok(&batch.rewards * reward_scale + &((1.0 - &batch.dones) * &soft * discount))
}

/// `scale * r + discount * (1 - done) * Qbar(s', pibar(s'))`.
pub fn ddpg_critic_target(
    target_actor: &Mlp,
    target_critic: &Mlp,
    discount: f64,
    reward_scale: f64,
    batch: &Batch,
) -> Result<Array1<f64>> {
    let a = target_actor.forward(batch.next_states.view())?.mapv(f64::tanh);
    let x = critic_input(batch.next_states.view(), a.view());
    let q = column(target_critic.forward(x.view())?);
    Ok(&batch.rewards * reward_scale + &((1.0 - &batch.dones) * &q * discount))
}

/// `mean(0.5 * (Q(s, a) - y)^2)`.
fn regression(
    critic: &Mlp,
    states: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    y: &Array1<f64>,
) -> Result<(f64, Grads)> {
    let x = critic_input(states, actions);
    let (q, cache) = critic.forward_cached(x.view())?;
    let n = y.len() as f64;
    let resid = column(q) - y;
    let loss = 0.5 * resid.dot(&resid) / n;
    let d_out = (resid / n).insert_axis(Axis(1));
    let (g, _) = critic.backward(&cache, d_out.view());
    Ok((loss, g))
}

pub fn sac_critic_loss(critic: &Mlp, batch: &Batch, y: &Array1<f64>) -> Result<(f64, Grads)> {
    regression(critic, batch.states.view(), batch.actions.view(), y)
}

pub fn ddpg_critic_loss(critic: &Mlp, batch: &Batch, y: &Array1<f64>) -> Result<(f64, Grads)> {
    regression(critic, batch.states.view(), batch.actions.view(), y)
}

#[derive(Debug, Clone)]
pub struct PolicyLoss {
    pub loss: f64,
    pub grads: Grads,
    /// Per-sample log-probabilities of the fresh actions, reused by the
    /// temperature loss.
    pub log_prob: Array1<f64>,
}

/// `mean(alpha * log pi(a|s) - min_k Q_k(s, a))`, `a = tanh(mu + std * eps)`.
pub fn sac_policy_loss(
    policy: &Mlp,
    critics: &[Mlp],
    alpha: f64,
    states: ArrayView2<f64>,
    eps: &Array2<f64>,
) -> Result<PolicyLoss> {
    let (out, cache) = policy.forward_cached(states)?;
    let sq = squash(out.view(), eps);
    let x = critic_input(states, sq.action.view());
    let n = states.nrows();
    let dim = sq.action.ncols();

    let mut caches = Vec::with_capacity(critics.len());
    let mut qs = Vec::with_capacity(critics.len());
    for c in critics {
        let (q, cc) = c.forward_cached(x.view())?;
        qs.push(column(q));
        caches.push(cc);
    }
    let mut qmin = Array1::zeros(n);
    let mut d_action = Array2::zeros((n, dim));
    for (k, (c, cc)) in critics.iter().zip(&caches).enumerate() {
        // route dJ/dQ only to rows where critic k is the minimum
        let mut dq = Array2::zeros((n, 1));
        for i in 0..n {
            let best = (0..qs.len()).fold(0, |b, j| if qs[j][i] < qs[b][i] { j } else { b });
            if best == k {
                qmin[i] = qs[k][i];
                dq[[i, 0]] = -1.0 / n as f64;
            }
        }
        let (_, dx) = c.backward(cc, dq.view());
        d_action += &dx.slice(ndarray::s![.., states.ncols()..]);
    }
    let loss = (alpha * sq.log_prob.sum() - qmin.sum()) / n as f64;
    let d_log_prob = Array1::from_elem(n, alpha / n as f64);
    let d_out = squash_backward(&sq, &d_action, &d_log_prob);
    let (grads, _) = policy.backward(&cache, d_out.view());
    Ok(PolicyLoss {
        loss,
        grads,
        log_prob: sq.log_prob,
    })
}

/// `alpha * mean(-log pi - h_min)` with `alpha = exp(log_alpha)`; returns the
/// loss and its derivative with respect to `log_alpha`.
pub fn temperature_loss(log_alpha: f64, log_prob: &Array1<f64>, h_min: f64) -> (f64, f64) {
    let alpha = log_alpha.exp();
    let m = log_prob.iter().map(|lp| -lp - h_min).sum::<f64>() / log_prob.len() as f64;
    (alpha * m, alpha * m)
}

/// Actor gradient for `mean(-Q(s, tanh(net(s))))` given `dQ/da` per row.
pub fn ddpg_actor_grads_from_dq(
    actor: &Mlp,
    states: ArrayView2<f64>,
    dq_da: &Array2<f64>,
) -> Result<(Array2<f64>, Grads)> {
    let (out, cache) = actor.forward_cached(states)?;
    let a = out.mapv(f64::tanh);
    let n = states.nrows() as f64;
    let d_out = -(dq_da * &a.mapv(|v| 1.0 - v * v)) / n;
    let (g, _) = actor.backward(&cache, d_out.view());
    Ok((a, g))
}

/// `mean(-Q(s, pi(s)))`.
pub fn ddpg_actor_loss(actor: &Mlp, critic: &Mlp, states: ArrayView2<f64>) -> Result<(f64, Grads)> {
    let a = actor.forward(states)?.mapv(f64::tanh);
    let x = critic_input(states, a.view());
    let (q, cc) = critic.forward_cached(x.view())?;
    let n = states.nrows();
    let (_, dx) = critic.backward(&cc, Array2::from_elem((n, 1), 1.0).view());
    let dq_da = dx.slice(ndarray::s![.., states.ncols()..]).to_owned();
    let (_, g) = ddpg_actor_grads_from_dq(actor, states, &dq_da)?;
    Ok((-q.sum() / n as f64, g))
}

/// Greedy action for a batch of states from a stochastic policy head.
pub fn sac_greedy(policy: &Mlp, states: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(deterministic(policy.forward(states)?.view()))
}
