//! Actor losses shared by the advantage-weighted algorithms, plus the small
//! pieces (score-function gradients, top-k selection, expectiles) the update
//! procedures are built from.

use super::buffer::TransitionRef;
use super::{concat, AgentConfig};
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::policy::{
    head_backward, head_forward, head_mean_backward, log_prob_with_replacement, PolicyHeadConfig, PolicyHeadOutput,
};
use crate::samplers::Rng;
use crate::exp_q;
use std::cmp::Ordering;

/// Loss value, gradient with respect to the actor's flat parameters, and the
/// per-transition weights that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ActorLoss {
    /// Number of transitions that received exactly zero weight.
    pub fn zero_weights(&self) -> usize {
        self.weights.iter().filter(|w| **w == 0.0).count()
    }
}

/// `exp_{q'}((Q−V)/τ)`, capped at `max_weight`.
pub fn tawac_weight(advantage: f64, tau: f64, q_prime: f64, max_weight: f64) -> f64 {
    exp_q(advantage / tau, q_prime).min(max_weight)
}

/// `exp((Q−V)/τ)`, capped at `max_weight`.
pub fn awac_weight(advantage: f64, tau: f64, max_weight: f64) -> f64 {
    (advantage / tau).exp().min(max_weight)
}

/// `exp((Q−V)/τ − ln π_D(a|s))`, capped at `max_weight`.
pub fn inac_weight(advantage: f64, tau: f64, behavior_log_prob: f64, max_weight: f64) -> f64 {
    (advantage / tau - behavior_log_prob).exp().min(max_weight)
}

/// `−(1/B) Σ wᵢ ln π_φ(aᵢ|sᵢ)` and its gradient in the actor parameters, with
/// the weights held fixed. Actions are in the head's distribution space;
/// out-of-support actions of a light-tailed head are replaced first.
/// Zero-weight transitions are skipped entirely.
pub fn weighted_likelihood(
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    states: &[&[f64]],
    actions: &[Vec<f64>],
    weights: &[f64],
    rng: &mut Rng,
) -> Result<(f64, Vec<f64>)> {
    let b = states.len();
    if b == 0 || actions.len() != b || weights.len() != b {
        return Err(Error::InsufficientData { needed: 1, have: b.min(actions.len()).min(weights.len()) });
    }
    let mut grad = vec![0.0; actor.len()];
    let mut loss = 0.0;
    for ((s, a), w) in states.iter().zip(actions).zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let (raw, tape) = actor.forward(s)?;
        let out = head_forward(head, &raw)?;
        let (lp, used) = log_prob_with_replacement(head, &out, a, rng)?;
        loss -= w * lp / b as f64;
        let g = head_backward(head, &out, &out.dist.grad_log_prob(&used)?)?;
        let scaled: Vec<f64> = g.iter().map(|v| -w * v / b as f64).collect();
        actor.backward_into(&tape, &scaled, &mut grad)?;
    }
    Ok((loss, grad))
}

/// Advantages `Q(s,a) − V(s)` for a batch, with `a` in environment units.
pub fn advantages(batch: &[TransitionRef<'_>], critic: &MlpParams, value: &MlpParams) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| Ok(critic.predict(&concat(t.state, t.action))?[0] - value.predict(t.state)?[0]))
        .collect()
}

fn dataset_loss(
    batch: &[TransitionRef<'_>],
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    weights: Vec<f64>,
    rng: &mut Rng,
) -> Result<ActorLoss> {
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state).collect();
    let actions: Vec<Vec<f64>> = batch.iter().map(|t| head.from_env(t.action)).collect();
    let (loss, grad) = weighted_likelihood(actor, head, &states, &actions, &weights, rng)?;
    Ok(ActorLoss { loss, grad, weights })
}

/// Tsallis advantage-weighted loss on dataset actions.
pub fn tawac_loss(
    batch: &[TransitionRef<'_>],
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    critic: &MlpParams,
    value: &MlpParams,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<ActorLoss> {
    let w = advantages(batch, critic, value)?
        .into_iter()
        .map(|a| tawac_weight(a, config.tau, config.q_prime, config.max_weight))
        .collect();
    dataset_loss(batch, actor, head, w, rng)
}

pub fn awac_loss(
    batch: &[TransitionRef<'_>],
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    critic: &MlpParams,
    value: &MlpParams,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<ActorLoss> {
    let w = advantages(batch, critic, value)?
        .into_iter()
        .map(|a| awac_weight(a, config.tau, config.max_weight))
        .collect();
    dataset_loss(batch, actor, head, w, rng)
}

/// In-sample loss; every transition must carry its behavior log-density.
pub fn inac_loss(
    batch: &[TransitionRef<'_>],
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    critic: &MlpParams,
    value: &MlpParams,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<ActorLoss> {
    let behavior = batch
        .iter()
        .enumerate()
        .map(|(i, t)| t.behavior_log_prob.ok_or(Error::MissingBehaviorLogProb(i)))
        .collect::<Result<Vec<f64>>>()?;
    let w = advantages(batch, critic, value)?
        .into_iter()
        .zip(behavior)
        .map(|(a, lb)| inac_weight(a, config.tau, lb, config.max_weight))
        .collect();
    dataset_loss(batch, actor, head, w, rng)
}

/// `λ = bc_alpha / mean|Q(s, π(s))|` over the batch, with `π(s)` the head
/// mean.
pub fn td3bc_lambda(
    batch: &[TransitionRef<'_>],
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    critic: &MlpParams,
    bc_alpha: f64,
) -> Result<f64> {
    let mut abs_q = 0.0;
    for t in batch {
        let m = head_forward(head, &actor.predict(t.state)?)?.mean_env(head);
        abs_q += critic.predict(&concat(t.state, &m))?[0].abs();
    }
    Ok(bc_alpha / (abs_q / batch.len().max(1) as f64).max(1e-8))
}

/// `(1/B) Σ [−λ Q(s, π(s)) + ‖π(s) − a‖²]` with `π(s)` the head mean in
/// environment units and `λ` held fixed.
pub fn td3bc_actor_loss(
    batch: &[TransitionRef<'_>],
    actor: &MlpParams,
    head: &PolicyHeadConfig,
    critic: &MlpParams,
    lambda: f64,
) -> Result<ActorLoss> {
    if batch.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    let b = batch.len() as f64;
    let mut grad = vec![0.0; actor.len()];
    let mut loss = 0.0;
    for t in batch {
        let (raw, tape) = actor.forward(t.state)?;
        let out = head_forward(head, &raw)?;
        let m = out.mean_env(head);
        let x = concat(t.state, &m);
        let (q, qtape) = critic.forward(&x)?;
        let dq = critic.input_gradient(&qtape, &[1.0])?;
        loss -= lambda * q[0] / b;
        let gm: Vec<f64> = (0..m.len())
            .map(|i| {
                let d = m[i] - t.action[i];
                loss += d * d / b;
                (-lambda * dq[t.state.len() + i] + 2.0 * d) / b
            })
            .collect();
        actor.backward_into(&tape, &head_mean_backward(head, &out, &gm)?, &mut grad)?;
    }
    Ok(ActorLoss { loss, grad, weights: vec![1.0; batch.len()] })
}

/// Score-function estimate `Σᵢ wᵢ (fᵢ − b) ∇_raw ln π(aᵢ)` with the weighted
/// mean `b` of `f` as baseline. `weights` are sample weights (`1/K` for
/// Monte Carlo, `π(a)Δa` on a quadrature grid).
pub fn score_function_raw_grad(
    head: &PolicyHeadConfig,
    out: &PolicyHeadOutput,
    actions: &[Vec<f64>],
    weights: &[f64],
    values: &[f64],
) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if actions.is_empty() || !(total > 0.0) {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    let baseline = weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>() / total;
    let mut g = vec![0.0; head.raw_dim()];
    for ((a, w), f) in actions.iter().zip(weights).zip(values) {
        let c = w * (f - baseline);
        if c == 0.0 {
            continue;
        }
        let gr = head_backward(head, out, &out.dist.grad_log_prob(a)?)?;
        for (gi, v) in g.iter_mut().zip(gr) {
            *gi += c * v;
        }
    }
    Ok(g)
}

fn rank(values: &[f64], i: usize, j: usize) -> Ordering {
    values[j].total_cmp(&values[i]).then(i.cmp(&j))
}

/// Indices of the `k` largest values, best first; ties go to the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(values.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k > 0 && k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&i, &j| rank(values, i, j));
    }
    idx.truncate(k);
    idx.sort_unstable_by(|&i, &j| rank(values, i, j));
    debug_assert_eq!(idx, {
        let mut all: Vec<usize> = (0..values.len()).collect();
        all.sort_by(|&i, &j| rank(values, i, j));
        all.truncate(k);
        all
    });
    idx
}

/// Asymmetric squared loss `|e − 1(u<0)|·u²` with `u = target − v`, and its
/// derivative in `v`.
pub fn expectile_loss(target: f64, v: f64, expectile: f64) -> (f64, f64) {
    let u = target - v;
    let w = if u < 0.0 { 1.0 - expectile } else { expectile };
    (w * u * u, -2.0 * w * u)
}
