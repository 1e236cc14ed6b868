//! Actor-critic agents.
//!
//! Online: SAC, GreedyAC and TAWAC (AWAC also runs online). Offline: TAWAC,
//! AWAC, IQL, InAC and TD3BC. Every algorithm is a set of losses over small
//! MLP critics and a policy-head actor; [`Agent::update`] performs one
//! gradient step of each network it owns.
//!
//! Conventions shared by all algorithms:
//! * stored actions are clipped environment actions; critics see them as is
//!   and actors convert them with [`PolicyHeadConfig::from_env`];
//! * advantages use the target critic, `A = Q̄(s,a) − V(s)`;
//! * online V regresses on `K` fresh policy samples, offline V uses expectile
//!   regression on dataset actions;
//! * twin critics (min of two) for SAC and TD3BC, one critic otherwise.

mod buffer;
mod dataset;
mod losses;
mod update;

pub use buffer::{ReplayBuffer, Transition, TransitionRef};
pub use dataset::{generate_offline_dataset, BehaviorPolicy, Dataset, UniformPolicy, DATASET_MAGIC, DATASET_VERSION};
pub use losses::{
    advantages, awac_loss, awac_weight, expectile_loss, inac_loss, inac_weight, score_function_raw_grad,
    tawac_loss, tawac_weight, td3bc_actor_loss, td3bc_lambda, top_k_indices, weighted_likelihood, ActorLoss,
};
pub use update::{
    awac_update, critic_td_step, greedyac_update, inac_update, iql_update, sac_update, tawac_update, td3bc_update,
};

use crate::error::{check_dim, Error, Result};
use crate::nn::{adam_step, polyak_update, AdamConfig, AdamState, MlpParams};
use crate::policy::{head_forward, Family, PolicyHeadConfig, PolicyHeadOutput};
use crate::samplers::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sac,
    GreedyAc,
    Tawac,
    Awac,
    Iql,
    Inac,
    Td3bc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Sac,
        Algorithm::GreedyAc,
        Algorithm::Tawac,
        Algorithm::Awac,
        Algorithm::Iql,
        Algorithm::Inac,
        Algorithm::Td3bc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::GreedyAc => "greedyac",
            Algorithm::Tawac => "tawac",
            Algorithm::Awac => "awac",
            Algorithm::Iql => "iql",
            Algorithm::Inac => "inac",
            Algorithm::Td3bc => "td3bc",
        }
    }

    fn twin_critics(self) -> bool {
        matches!(self, Algorithm::Sac | Algorithm::Td3bc)
    }

    fn uses_value_net(self) -> bool {
        matches!(self, Algorithm::Tawac | Algorithm::Awac | Algorithm::Iql | Algorithm::Inac)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown agent `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Online,
    Offline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::Offline => "offline",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Mode::Online),
            "offline" => Ok(Mode::Offline),
            _ => Err(Error::config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub mode: Mode,
    /// Temperature (entropy scale for SAC and the GreedyAC proposal).
    pub tau: f64,
    /// Entropic index of the TAWAC advantage weight.
    pub q_prime: f64,
    /// Fraction of proposal samples kept by GreedyAC.
    pub rho: f64,
    /// Proposal samples per state for GreedyAC.
    pub proposal_samples: usize,
    pub expectile: f64,
    pub bc_alpha: f64,
    pub critic_lr: f64,
    pub actor_lr_multiplier: f64,
    pub batch_size: usize,
    pub polyak: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Policy samples per state for online V targets and the SAC actor.
    pub action_samples: usize,
    /// Cap on advantage weights.
    pub max_weight: f64,
    /// Use the reparameterized actor gradient (Gaussian heads only).
    pub reparameterize: bool,
    /// TD3BC target smoothing noise and its clip, as fractions of the
    /// action half-range.
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
}

impl AgentConfig {
    /// Small networks, batch 32, Polyak 0.01, Adam (0.9, 0.999).
    pub fn online(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            mode: Mode::Online,
            tau: 0.1,
            q_prime: 0.0,
            rho: 0.1,
            proposal_samples: 30,
            expectile: 0.7,
            bc_alpha: 2.5,
            critic_lr: 1e-3,
            actor_lr_multiplier: 1.0,
            batch_size: 32,
            polyak: 0.01,
            gamma: 0.99,
            hidden: vec![64, 64],
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            action_samples: 4,
            max_weight: 100.0,
            reparameterize: false,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
        }
    }

    /// Wide networks, batch 256, Polyak 0.005, Adam (0.9, 0.99).
    pub fn offline(algorithm: Algorithm) -> Self {
        Self {
            mode: Mode::Offline,
            tau: 1.0,
            critic_lr: 3e-4,
            batch_size: 256,
            polyak: 0.005,
            hidden: vec![256, 256],
            adam_beta2: 0.99,
            ..Self::online(algorithm)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("critic_lr", self.critic_lr),
            ("actor_lr_multiplier", self.actor_lr_multiplier),
            ("max_weight", self.max_weight),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let open_unit = [
            ("gamma", self.gamma),
            ("expectile", self.expectile),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ];
        for (name, v) in open_unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return Err(Error::config(format!("polyak must lie in (0, 1], got {}", self.polyak)));
        }
        if !self.q_prime.is_finite() {
            return Err(Error::config("q_prime must be finite"));
        }
        if !(self.bc_alpha >= 0.0 && self.policy_noise >= 0.0 && self.noise_clip >= 0.0) {
            return Err(Error::config("bc_alpha, policy_noise and noise_clip must be non-negative"));
        }
        if self.batch_size == 0 || self.action_samples == 0 || self.proposal_samples == 0 || self.policy_delay == 0 {
            return Err(Error::config("batch_size, action_samples, proposal_samples and policy_delay must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if self.algorithm == Algorithm::Td3bc && self.mode == Mode::Online {
            return Err(Error::config("td3bc is an offline algorithm"));
        }
        Ok(())
    }

    /// Number of proposal actions GreedyAC keeps per state.
    pub fn top_k(&self) -> usize {
        ((self.rho * self.proposal_samples as f64).ceil() as usize).clamp(1, self.proposal_samples)
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig::new(lr, self.adam_beta1, self.adam_beta2)
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

pub(crate) fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

/// Network parameters with their optimizer state.
#[derive(Clone, Debug)]
pub struct Net {
    pub params: MlpParams,
    pub optimizer: AdamState,
}

impl Net {
    pub fn new(params: MlpParams, config: AdamConfig) -> Self {
        let optimizer = AdamState::new(params.len(), config);
        Self { params, optimizer }
    }

    /// One Adam step along `-grad`.
    pub fn apply(&mut self, grad: &[f64]) -> Result<()> {
        adam_step(self.params.as_mut_slice(), grad, &mut self.optimizer)
    }
}

/// Policy network, its Polyak-averaged copy, and the head that interprets
/// their outputs.
#[derive(Clone, Debug)]
pub struct Actor {
    pub net: Net,
    pub target: MlpParams,
    pub head: PolicyHeadConfig,
}

impl Actor {
    pub fn dist(&self, state: &[f64]) -> Result<PolicyHeadOutput> {
        head_forward(&self.head, &self.net.params.predict(state)?)
    }

    pub fn target_dist(&self, state: &[f64]) -> Result<PolicyHeadOutput> {
        head_forward(&self.head, &self.target.predict(state)?)
    }
}

/// One or two Q networks with their targets.
#[derive(Clone, Debug)]
pub struct Critics {
    pub nets: Vec<Net>,
    pub targets: Vec<MlpParams>,
}

impl Critics {
    /// Minimum over the target critics.
    pub fn target_q(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let x = concat(state, action);
        let mut q = f64::INFINITY;
        for t in &self.targets {
            q = q.min(t.predict(&x)?[0]);
        }
        Ok(q)
    }

    /// Minimum over the online critics.
    pub fn q(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let x = concat(state, action);
        let mut q = f64::INFINITY;
        for n in &self.nets {
            q = q.min(n.params.predict(&x)?[0]);
        }
        Ok(q)
    }

    pub fn update_targets(&mut self, polyak: f64) -> Result<()> {
        for (t, n) in self.targets.iter_mut().zip(&self.nets) {
            polyak_update(t, &n.params, polyak)?;
        }
        Ok(())
    }
}

/// Scalar losses from one update, for logging.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Losses {
    pub critic: f64,
    pub actor: Option<f64>,
    pub value: Option<f64>,
    pub proposal: Option<f64>,
    /// Fraction of actor-loss transitions with exactly zero weight.
    pub zero_weight_fraction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub config: AgentConfig,
    pub actor: Actor,
    /// GreedyAC's sampling policy.
    pub proposal: Option<Actor>,
    pub critics: Critics,
    pub value: Option<Net>,
    updates: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, head: PolicyHeadConfig, obs_dim: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        head.validate()?;
        if config.reparameterize && head.family != Family::Gaussian {
            return Err(Error::config("the reparameterized path needs a gaussian head"));
        }
        let act_dim = head.action_dim();
        let actor_lr = config.critic_lr * config.actor_lr_multiplier;
        let make_actor = |rng: &mut Rng| -> Result<Actor> {
            let p = MlpParams::init(&config.sizes(obs_dim, head.raw_dim()), rng)?;
            Ok(Actor { target: p.clone(), net: Net::new(p, config.adam(actor_lr)), head: head.clone() })
        };
        let actor = make_actor(rng)?;
        let n_critics = if config.algorithm.twin_critics() { 2 } else { 1 };
        let mut nets = Vec::with_capacity(n_critics);
        for _ in 0..n_critics {
            let p = MlpParams::init(&config.sizes(obs_dim + act_dim, 1), rng)?;
            nets.push(Net::new(p, config.adam(config.critic_lr)));
        }
        let critics = Critics { targets: nets.iter().map(|n| n.params.clone()).collect(), nets };
        let value = if config.algorithm.uses_value_net() {
            let p = MlpParams::init(&config.sizes(obs_dim, 1), rng)?;
            Some(Net::new(p, config.adam(config.critic_lr)))
        } else {
            None
        };
        let proposal = if config.algorithm == Algorithm::GreedyAc { Some(make_actor(rng)?) } else { None };
        Ok(Self { config, actor, proposal, critics, value, updates: 0 })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.net.params.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.head.action_dim()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Exploratory environment action, clipped to the box. TD3BC executes
    /// its mean.
    pub fn act(&self, obs: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let out = self.actor.dist(obs)?;
        let head = &self.actor.head;
        if self.config.algorithm == Algorithm::Td3bc {
            return Ok(head.clip(&out.mean_env(head)));
        }
        Ok(head.clip(&out.sample_env(head, rng)))
    }

    /// Deterministic evaluation action.
    pub fn act_greedy(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let head = &self.actor.head;
        Ok(head.clip(&self.actor.dist(obs)?.mean_env(head)))
    }

    /// One gradient step of every network, on a batch drawn from `data`.
    pub fn update(&mut self, data: &ReplayBuffer, rng: &mut Rng) -> Result<Losses> {
        check_dim(self.obs_dim(), data.obs_dim())?;
        check_dim(self.action_dim(), data.act_dim())?;
        let losses = match self.config.algorithm {
            Algorithm::Sac => sac_update(&mut self.actor, &mut self.critics, data, &self.config, rng),
            Algorithm::GreedyAc => {
                let proposal = self.proposal.as_mut().expect("greedyac agents own a proposal");
                greedyac_update(&mut self.actor, proposal, &mut self.critics, data, &self.config, rng)
            }
            Algorithm::Tawac | Algorithm::Awac => {
                let v = self.value.as_mut().expect("value network");
                if self.config.algorithm == Algorithm::Tawac {
                    tawac_update(&mut self.actor, &mut self.critics, v, data, &self.config, rng)
                } else {
                    awac_update(&mut self.actor, &mut self.critics, v, data, &self.config, rng)
                }
            }
            Algorithm::Iql => {
                let v = self.value.as_mut().expect("value network");
                iql_update(&mut self.actor, &mut self.critics, v, data, &self.config, rng)
            }
            Algorithm::Inac => {
                let v = self.value.as_mut().expect("value network");
                inac_update(&mut self.actor, &mut self.critics, v, data, &self.config, rng)
            }
            Algorithm::Td3bc => {
                td3bc_update(&mut self.actor, &mut self.critics, data, &self.config, self.updates, rng)
            }
        }?;
        self.updates += 1;
        Ok(losses)
    }

    /// Named networks for checkpointing.
    pub fn networks(&self) -> Vec<(String, &MlpParams)> {
        let mut v = vec![("actor".to_string(), &self.actor.net.params), ("actor_target".to_string(), &self.actor.target)];
        for (i, (n, t)) in self.critics.nets.iter().zip(&self.critics.targets).enumerate() {
            v.push((format!("critic{i}"), &n.params));
            v.push((format!("critic{i}_target"), t));
        }
        if let Some(val) = &self.value {
            v.push(("value".to_string(), &val.params));
        }
        if let Some(p) = &self.proposal {
            v.push(("proposal".to_string(), &p.net.params));
        }
        v
    }

    /// Restores networks by name; unknown names are an error, missing ones
    /// keep their current values.
    pub fn load_networks(&mut self, nets: Vec<(String, MlpParams)>) -> Result<()> {
        for (name, p) in nets {
            let slot = self.network_mut(&name).ok_or_else(|| Error::format(format!("unknown network `{name}`")))?;
            if slot.sizes() != p.sizes() {
                return Err(Error::format(format!("network `{name}` has layer sizes {:?}", p.sizes())));
            }
            *slot = p;
        }
        Ok(())
    }

    fn network_mut(&mut self, name: &str) -> Option<&mut MlpParams> {
        match name {
            "actor" => Some(&mut self.actor.net.params),
            "actor_target" => Some(&mut self.actor.target),
            "value" => self.value.as_mut().map(|v| &mut v.params),
            "proposal" => self.proposal.as_mut().map(|p| &mut p.net.params),
            _ => {
                let rest = name.strip_prefix("critic")?;
                let (idx, target) = match rest.strip_suffix("_target") {
                    Some(i) => (i, true),
                    None => (rest, false),
                };
                let i: usize = idx.parse().ok()?;
                if target {
                    self.critics.targets.get_mut(i)
                } else {
                    self.critics.nets.get_mut(i).map(|n| &mut n.params)
                }
            }
        }
    }
}

/// A checkpointed actor used as a behavior policy. The reported
/// log-density is that of the stored (clipped) action, which is exact for
/// heads whose support lies inside the action box.
pub struct ActorBehavior<'a> {
    pub actor: &'a Actor,
}

impl BehaviorPolicy for ActorBehavior<'_> {
    fn act(&mut self, obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let head = &self.actor.head;
        let out = self.actor.dist(obs)?;
        let a = head.clip(&out.sample_env(head, rng));
        let lp = out.dist.log_prob(&head.from_env(&a))?;
        Ok((a, lp))
    }
}
