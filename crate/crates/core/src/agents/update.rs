//! One-step update procedures. Each draws a batch, takes one Adam step on
//! every network it trains, moves the target networks, and reports losses.

use super::buffer::{ReplayBuffer, TransitionRef};
use super::losses::{
    awac_loss, expectile_loss, inac_loss, score_function_raw_grad, tawac_loss, tawac_weight, td3bc_actor_loss,
    td3bc_lambda, top_k_indices, weighted_likelihood, ActorLoss,
};
use super::{concat, Actor, AgentConfig, Critics, Losses, Mode, Net};
use crate::distributions::PolicyDistribution;
use crate::error::{Error, Result};
use crate::nn::{polyak_update, MlpParams};
use crate::policy::{head_backward, head_forward, log_prob_with_replacement, PolicyHeadOutput};
use crate::samplers::Rng;

/// Regresses every critic on the fixed targets `y` (squared error), then
/// moves the target critics when `polyak` is given. Returns the mean loss
/// of the first critic.
pub fn critic_td_step(critics: &mut Critics, batch: &[TransitionRef<'_>], y: &[f64], polyak: Option<f64>) -> Result<f64> {
    let b = batch.len() as f64;
    let mut first = 0.0;
    for (k, net) in critics.nets.iter_mut().enumerate() {
        let mut grad = vec![0.0; net.params.len()];
        let mut loss = 0.0;
        for (t, target) in batch.iter().zip(y) {
            let (out, tape) = net.params.forward(&concat(t.state, t.action))?;
            let d = out[0] - target;
            loss += 0.5 * d * d / b;
            net.params.backward_into(&tape, &[d / b], &mut grad)?;
        }
        net.apply(&grad)?;
        if k == 0 {
            first = loss;
        }
    }
    if let Some(p) = polyak {
        critics.update_targets(p)?;
    }
    Ok(first)
}

fn not_done(t: &TransitionRef<'_>) -> f64 {
    if t.terminated {
        0.0
    } else {
        1.0
    }
}

/// Draw in distribution space that is guaranteed to have finite density,
/// with its log-density.
fn draw(actor: &Actor, out: &PolicyHeadOutput, rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
    let a = out.dist.sample(rng);
    let (lp, used) = log_prob_with_replacement(&actor.head, out, &a, rng)?;
    Ok((used, lp))
}

fn env_action(actor: &Actor, a: &[f64]) -> Vec<f64> {
    actor.head.clip(&actor.head.to_env(a))
}

/// Value and action-gradient of the smallest online critic at `(s, a)`.
fn q_with_action_grad(critics: &Critics, s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
    let x = concat(s, a);
    let mut best: Option<(f64, usize)> = None;
    for (i, n) in critics.nets.iter().enumerate() {
        let q = n.params.predict(&x)?[0];
        if best.map_or(true, |(b, _)| q < b) {
            best = Some((q, i));
        }
    }
    let (q, i) = best.expect("at least one critic");
    let net = &critics.nets[i].params;
    let (_, tape) = net.forward(&x)?;
    let g = net.input_gradient(&tape, &[1.0])?;
    Ok((q, g[s.len()..].to_vec()))
}

fn add_scaled(acc: &mut [f64], g: &[f64], scale: f64) {
    for (a, v) in acc.iter_mut().zip(g) {
        *a += scale * v;
    }
}

/// Soft actor-critic. Critic target `r + γ(min Q̄(s',a') − τ ln π(a'|s'))`;
/// the actor minimizes `E_π[τ ln π − Q]` by the score-function estimator
/// over `action_samples` draws per state (or the reparameterized Gaussian
/// path when configured).
pub fn sac_update(
    actor: &mut Actor,
    critics: &mut Critics,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    let batch = data.sample(config.batch_size, rng)?;
    let mut y = Vec::with_capacity(batch.len());
    for t in &batch {
        let out = actor.dist(t.next_state)?;
        let (a, lp) = draw(actor, &out, rng)?;
        let q = critics.target_q(t.next_state, &env_action(actor, &a))?;
        y.push(t.reward + config.gamma * not_done(t) * (q - config.tau * lp));
    }
    let critic = critic_td_step(critics, &batch, &y, Some(config.polyak))?;

    let b = batch.len() as f64;
    let k = config.action_samples;
    let mut grad = vec![0.0; actor.net.params.len()];
    let mut loss = 0.0;
    for t in &batch {
        let (raw, tape) = actor.net.params.forward(t.state)?;
        let out = head_forward(&actor.head, &raw)?;
        let g_raw = if config.reparameterize {
            let (l, g) = reparameterized_raw_grad(actor, critics, &out, t.state, config.tau, rng)?;
            loss += l / b;
            g
        } else {
            let mut acts = Vec::with_capacity(k);
            let mut f = Vec::with_capacity(k);
            for _ in 0..k {
                let (a, lp) = draw(actor, &out, rng)?;
                f.push(config.tau * lp - critics.q(t.state, &env_action(actor, &a))?);
                acts.push(a);
            }
            loss += f.iter().sum::<f64>() / (k as f64 * b);
            score_function_raw_grad(&actor.head, &out, &acts, &vec![1.0 / k as f64; k], &f)?
        };
        let scaled: Vec<f64> = g_raw.iter().map(|v| v / b).collect();
        actor.net.params.backward_into(&tape, &scaled, &mut grad)?;
    }
    actor.net.apply(&grad)?;
    Ok(Losses { critic, actor: Some(loss), ..Losses::default() })
}

/// `a = μ + σ·ε` for a diagonal Gaussian head; gradient of
/// `τ ln π(a) − Q(s, clip(a))` with respect to the raw outputs.
fn reparameterized_raw_grad(
    actor: &Actor,
    critics: &Critics,
    out: &PolicyHeadOutput,
    s: &[f64],
    tau: f64,
    rng: &mut Rng,
) -> Result<(f64, Vec<f64>)> {
    let PolicyDistribution::Gaussian(ls) = &out.dist else {
        return Err(Error::config("the reparameterized path needs a gaussian head"));
    };
    let head = &actor.head;
    let n = head.action_dim();
    let eps: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let sigma: Vec<f64> = (0..n).map(|i| ls.scale_chol.get(i, i)).collect();
    let a: Vec<f64> = (0..n).map(|i| ls.mu[i] + sigma[i] * eps[i]).collect();
    let clipped = head.clip(&a);
    let (q, dq) = q_with_action_grad(critics, s, &clipped)?;
    let lp = out.dist.log_prob(&a)?;
    let mut g = vec![0.0; head.raw_dim()];
    for i in 0..n {
        let dqa = if clipped[i] == a[i] { dq[i] } else { 0.0 };
        let t = out.raw[i].tanh();
        let half = 0.5 * (head.action_high[i] - head.action_low[i]);
        g[i] = -dqa * half * (1.0 - t * t);
        let r = out.raw[n + i];
        if r > head.log_std_min && r < head.log_std_max {
            g[n + i] = (-tau / sigma[i] - dqa * eps[i]) * sigma[i];
        }
    }
    Ok((tau * lp - q, g))
}

/// Greedy actor-critic. The proposal draws `P` actions per state; the top
/// `⌈ρP⌉` by critic value train the actor by maximum likelihood, and the
/// proposal by the same likelihood plus `τ` times its entropy estimate.
pub fn greedyac_update(
    actor: &mut Actor,
    proposal: &mut Actor,
    critics: &mut Critics,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    let batch = data.sample(config.batch_size, rng)?;
    let mut y = Vec::with_capacity(batch.len());
    for t in &batch {
        let out = actor.dist(t.next_state)?;
        let (a, _) = draw(actor, &out, rng)?;
        y.push(t.reward + config.gamma * not_done(t) * critics.target_q(t.next_state, &env_action(actor, &a))?);
    }
    let critic = critic_td_step(critics, &batch, &y, Some(config.polyak))?;

    let b = batch.len() as f64;
    let p = config.proposal_samples;
    let k = config.top_k();
    let mut g_actor = vec![0.0; actor.net.params.len()];
    let mut g_prop = vec![0.0; proposal.net.params.len()];
    let (mut actor_loss, mut prop_loss) = (0.0, 0.0);
    for t in &batch {
        let (praw, ptape) = proposal.net.params.forward(t.state)?;
        let pout = head_forward(&proposal.head, &praw)?;
        let mut samples = Vec::with_capacity(p);
        let mut lps = Vec::with_capacity(p);
        let mut values = Vec::with_capacity(p);
        for _ in 0..p {
            let (a, lp) = draw(proposal, &pout, rng)?;
            values.push(critics.q(t.state, &env_action(proposal, &a))?);
            samples.push(a);
            lps.push(lp);
        }
        let chosen = top_k_indices(&values, k);

        let (araw, atape) = actor.net.params.forward(t.state)?;
        let aout = head_forward(&actor.head, &araw)?;
        let mut ga = vec![0.0; actor.head.raw_dim()];
        let mut gp = vec![0.0; proposal.head.raw_dim()];
        for &i in &chosen {
            let (lp, used) = log_prob_with_replacement(&actor.head, &aout, &samples[i], rng)?;
            actor_loss -= lp / (k as f64 * b);
            add_scaled(&mut ga, &head_backward(&actor.head, &aout, &aout.dist.grad_log_prob(&used)?)?, -1.0 / k as f64);
            prop_loss -= lps[i] / (k as f64 * b);
            let gr = head_backward(&proposal.head, &pout, &pout.dist.grad_log_prob(&samples[i])?)?;
            add_scaled(&mut gp, &gr, -1.0 / k as f64);
        }
        // −τ·H with H ≈ −mean ln π over the proposal's own draws.
        let entropy = -lps.iter().sum::<f64>() / p as f64;
        prop_loss -= config.tau * entropy / b;
        let g_ent = score_function_raw_grad(&proposal.head, &pout, &samples, &vec![1.0 / p as f64; p], &lps)?;
        add_scaled(&mut gp, &g_ent, config.tau);

        let ga: Vec<f64> = ga.iter().map(|v| v / b).collect();
        let gp: Vec<f64> = gp.iter().map(|v| v / b).collect();
        actor.net.params.backward_into(&atape, &ga, &mut g_actor)?;
        proposal.net.params.backward_into(&ptape, &gp, &mut g_prop)?;
    }
    actor.net.apply(&g_actor)?;
    proposal.net.apply(&g_prop)?;
    Ok(Losses { critic, actor: Some(actor_loss), proposal: Some(prop_loss), ..Losses::default() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Weighting {
    Tawac,
    Awac,
    Iql,
    Inac,
}

/// `½(V(s) − mean_k Q̄(s, a_k))²` with `a_k` drawn from the actor (its
/// target copy when `use_target`).
fn sampled_value_step(
    value: &mut Net,
    actor: &Actor,
    use_target: bool,
    critics: &Critics,
    batch: &[TransitionRef<'_>],
    samples: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let b = batch.len() as f64;
    let mut grad = vec![0.0; value.params.len()];
    let mut loss = 0.0;
    for t in batch {
        let out = if use_target { actor.target_dist(t.state)? } else { actor.dist(t.state)? };
        let mut target = 0.0;
        for _ in 0..samples {
            let (a, _) = draw(actor, &out, rng)?;
            target += critics.target_q(t.state, &env_action(actor, &a))? / samples as f64;
        }
        let (v, tape) = value.params.forward(t.state)?;
        let d = v[0] - target;
        loss += 0.5 * d * d / b;
        value.params.backward_into(&tape, &[d / b], &mut grad)?;
    }
    value.apply(&grad)?;
    Ok(loss)
}

/// Expectile regression of `V(s)` on `Q̄(s, a)` over batch actions.
fn expectile_value_step(value: &mut Net, critics: &Critics, batch: &[TransitionRef<'_>], expectile: f64) -> Result<f64> {
    let b = batch.len() as f64;
    let mut grad = vec![0.0; value.params.len()];
    let mut loss = 0.0;
    for t in batch {
        let q = critics.target_q(t.state, t.action)?;
        let (v, tape) = value.params.forward(t.state)?;
        let (l, g) = expectile_loss(q, v[0], expectile);
        loss += l / b;
        value.params.backward_into(&tape, &[g / b], &mut grad)?;
    }
    value.apply(&grad)?;
    Ok(loss)
}

fn weighted_update(
    rule: Weighting,
    actor: &mut Actor,
    critics: &mut Critics,
    value: &mut Net,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    let batch = data.sample(config.batch_size, rng)?;
    let online = config.mode == Mode::Online;
    let sampled_v = online && matches!(rule, Weighting::Tawac | Weighting::Awac);
    let value_loss = if sampled_v {
        sampled_value_step(value, actor, rule == Weighting::Tawac, critics, &batch, config.action_samples, rng)?
    } else {
        expectile_value_step(value, critics, &batch, config.expectile)?
    };

    let mut y = Vec::with_capacity(batch.len());
    for t in &batch {
        let next = match rule {
            Weighting::Iql => value.params.predict(t.next_state)?[0],
            _ => {
                let out = actor.dist(t.next_state)?;
                let (a, lp) = draw(actor, &out, rng)?;
                let q = critics.target_q(t.next_state, &env_action(actor, &a))?;
                if rule == Weighting::Inac {
                    q - config.tau * lp
                } else {
                    q
                }
            }
        };
        y.push(t.reward + config.gamma * not_done(t) * next);
    }
    let critic = critic_td_step(critics, &batch, &y, Some(config.polyak))?;

    let q_net = &critics.targets[0];
    let loss: ActorLoss = match rule {
        Weighting::Tawac if online => target_policy_tawac_loss(actor, critics, &value.params, &batch, config, rng)?,
        Weighting::Tawac => tawac_loss(&batch, &actor.net.params, &actor.head, q_net, &value.params, config, rng)?,
        Weighting::Awac | Weighting::Iql => {
            awac_loss(&batch, &actor.net.params, &actor.head, q_net, &value.params, config, rng)?
        }
        Weighting::Inac => inac_loss(&batch, &actor.net.params, &actor.head, q_net, &value.params, config, rng)?,
    };
    actor.net.apply(&loss.grad)?;
    polyak_update(&mut actor.target, &actor.net.params, config.polyak)?;
    Ok(Losses {
        critic,
        actor: Some(loss.loss),
        value: Some(value_loss),
        proposal: None,
        zero_weight_fraction: Some(loss.zero_weights() as f64 / batch.len() as f64),
    })
}

/// Online TAWAC actor loss: one action per state from the target actor.
fn target_policy_tawac_loss(
    actor: &Actor,
    critics: &Critics,
    value: &MlpParams,
    batch: &[TransitionRef<'_>],
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<ActorLoss> {
    let mut states = Vec::with_capacity(batch.len());
    let mut actions = Vec::with_capacity(batch.len());
    let mut weights = Vec::with_capacity(batch.len());
    for t in batch {
        let out = actor.target_dist(t.state)?;
        let (a, _) = draw(actor, &out, rng)?;
        let adv = critics.target_q(t.state, &env_action(actor, &a))? - value.predict(t.state)?[0];
        weights.push(tawac_weight(adv, config.tau, config.q_prime, config.max_weight));
        states.push(t.state);
        actions.push(a);
    }
    let (loss, grad) = weighted_likelihood(&actor.net.params, &actor.head, &states, &actions, &weights, rng)?;
    Ok(ActorLoss { loss, grad, weights })
}

/// Tsallis advantage-weighted actor-critic. Online, actions for the weighted
/// likelihood come from the target actor; offline, from the data.
pub fn tawac_update(
    actor: &mut Actor,
    critics: &mut Critics,
    value: &mut Net,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    weighted_update(Weighting::Tawac, actor, critics, value, data, config, rng)
}

pub fn awac_update(
    actor: &mut Actor,
    critics: &mut Critics,
    value: &mut Net,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    weighted_update(Weighting::Awac, actor, critics, value, data, config, rng)
}

/// Implicit Q-learning: expectile V, `Q ← r + γV(s')`, AWAC-weighted
/// policy extraction.
pub fn iql_update(
    actor: &mut Actor,
    critics: &mut Critics,
    value: &mut Net,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    weighted_update(Weighting::Iql, actor, critics, value, data, config, rng)
}

/// In-sample actor-critic; needs behavior log-densities in the data.
pub fn inac_update(
    actor: &mut Actor,
    critics: &mut Critics,
    value: &mut Net,
    data: &ReplayBuffer,
    config: &AgentConfig,
    rng: &mut Rng,
) -> Result<Losses> {
    weighted_update(Weighting::Inac, actor, critics, value, data, config, rng)
}

/// TD3 with behavior cloning. `step` is the number of updates already
/// taken; the actor and all targets move every `policy_delay` updates.
pub fn td3bc_update(
    actor: &mut Actor,
    critics: &mut Critics,
    data: &ReplayBuffer,
    config: &AgentConfig,
    step: u64,
    rng: &mut Rng,
) -> Result<Losses> {
    let batch = data.sample(config.batch_size, rng)?;
    let head = actor.head.clone();
    let mut y = Vec::with_capacity(batch.len());
    for t in &batch {
        let mean = actor.target_dist(t.next_state)?.mean_env(&head);
        let a: Vec<f64> = mean
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let half = 0.5 * (head.action_high[i] - head.action_low[i]);
                let c = config.noise_clip * half;
                m + (config.policy_noise * half * rng.normal()).clamp(-c, c)
            })
            .collect();
        y.push(t.reward + config.gamma * not_done(t) * critics.target_q(t.next_state, &head.clip(&a))?);
    }
    let delayed = step % config.policy_delay as u64 == 0;
    let critic = critic_td_step(critics, &batch, &y, None)?;
    if !delayed {
        return Ok(Losses { critic, ..Losses::default() });
    }

    let q1 = &critics.nets[0].params;
    let lambda = td3bc_lambda(&batch, &actor.net.params, &head, q1, config.bc_alpha)?;
    let ActorLoss { loss, grad, .. } = td3bc_actor_loss(&batch, &actor.net.params, &head, q1, lambda)?;
    actor.net.apply(&grad)?;
    critics.update_targets(config.polyak)?;
    polyak_update(&mut actor.target, &actor.net.params, config.polyak)?;
    Ok(Losses { critic, actor: Some(loss), ..Losses::default() })
}
