//! Experiment configuration files.
//!
//! ```toml
//! env = "pendulum"
//! agent = "tawac"
//! mode = "online"             # or "offline" (needs `dataset`); the default is
//!                             # offline when `dataset` is set
//! total_steps = 100000
//! protocol = "best"           # eval every 1000 steps over 1 episode;
//!                             # "sweep" is every 10000 over 3
//! eval_interval = 1000        # optional, overrides the protocol
//! eval_episodes = 1
//! eval_policy = "mean"        # or "sample"
//! seeds = [0, 1, 2]
//! out_dir = "runs/pendulum"
//!
//! [policy]
//! family = "q_gaussian"
//! q = 0.0
//!
//! [hyperparameters]           # any AgentConfig field
//! tau = 0.1
//! q_prime = 0.0
//!
//! [sweep]
//! critic_lr = [1e-2, 1e-3, 1e-4, 1e-5]
//! actor_lr_multiplier = [0.1, 1.0, 10.0]
//! tau = [0.01, 0.1, 1.0]
//! sweep_seeds = [100, 101, 102, 103, 104]
//! best_seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//! sweep_eval_interval = 10000 # these four default to the two protocols
//! sweep_eval_episodes = 3
//! best_eval_interval = 1000
//! best_eval_episodes = 1
//! ```

use crate::agents::{AgentConfig, Algorithm, Mode};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::policy::{Family, PolicyHeadConfig};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::PathBuf;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    pub family: Option<String>,
    pub q: Option<f64>,
    pub nu_base: Option<f64>,
    pub replacement_batch: Option<usize>,
    pub log_std_min: Option<f64>,
    pub log_std_max: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHyperparameters {
    pub tau: Option<f64>,
    pub q_prime: Option<f64>,
    pub rho: Option<f64>,
    pub proposal_samples: Option<usize>,
    pub expectile: Option<f64>,
    pub bc_alpha: Option<f64>,
    pub critic_lr: Option<f64>,
    pub actor_lr_multiplier: Option<f64>,
    pub batch_size: Option<usize>,
    pub polyak: Option<f64>,
    pub gamma: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub action_samples: Option<usize>,
    pub max_weight: Option<f64>,
    pub reparameterize: Option<bool>,
    pub policy_noise: Option<f64>,
    pub noise_clip: Option<f64>,
    pub policy_delay: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub critic_lr: Option<Vec<f64>>,
    pub actor_lr_multiplier: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub sweep_seeds: Option<Vec<u64>>,
    pub best_seeds: Option<Vec<u64>>,
    pub sweep_eval_interval: Option<u64>,
    pub sweep_eval_episodes: Option<usize>,
    pub best_eval_interval: Option<u64>,
    pub best_eval_episodes: Option<usize>,
}

/// The file as written, every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub env: Option<String>,
    pub agent: Option<String>,
    pub mode: Option<String>,
    pub total_steps: Option<u64>,
    pub protocol: Option<String>,
    pub eval_interval: Option<u64>,
    pub eval_episodes: Option<usize>,
    pub eval_policy: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub out_dir: Option<String>,
    pub dataset: Option<String>,
    pub buffer_capacity: Option<usize>,
    pub policy: Option<RawPolicy>,
    pub hyperparameters: Option<RawHyperparameters>,
    pub sweep: Option<RawSweep>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }
}

/// Evaluation schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    /// Every 1000 steps, 1 episode.
    Best,
    /// Every 10 000 steps, averaged over 3 episodes.
    Sweep,
}

impl Protocol {
    pub fn interval_and_episodes(self) -> (u64, usize) {
        match self {
            Protocol::Best => (1000, 1),
            Protocol::Sweep => (10_000, 3),
        }
    }
}

/// How evaluation episodes choose actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPolicy {
    Mean,
    Sample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub critic_lr: Vec<f64>,
    pub actor_lr_multiplier: Vec<f64>,
    pub tau: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
    pub best_seeds: Vec<u64>,
    /// Evaluation interval and episodes while sweeping.
    pub sweep_eval: (u64, usize),
    /// Evaluation interval and episodes of the best-point re-runs.
    pub best_eval: (u64, usize),
}

impl SweepSpec {
    /// Grid points in lexicographic order: critic lr, then multiplier, then
    /// temperature.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut v = Vec::new();
        for &lr in &self.critic_lr {
            for &m in &self.actor_lr_multiplier {
                for &t in &self.tau {
                    v.push((lr, m, t));
                }
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub agent: AgentConfig,
    pub head: PolicyHeadConfig,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eval_policy: EvalPolicy,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub dataset: Option<PathBuf>,
    pub buffer_capacity: usize,
    pub sweep: Option<SweepSpec>,
}

fn distinct(name: &str, seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::config(format!("{name} must not be empty")));
    }
    let set: HashSet<_> = seeds.iter().collect();
    if set.len() != seeds.len() {
        return Err(Error::config(format!("{name} contains duplicates")));
    }
    Ok(())
}

/// Protocol defaults with overrides, checked against the run length.
fn schedule(protocol: Protocol, interval: Option<u64>, episodes: Option<usize>, total: u64) -> Result<(u64, usize)> {
    let (i, e) = protocol.interval_and_episodes();
    let (i, e) = (interval.unwrap_or(i), episodes.unwrap_or(e));
    if i == 0 || e == 0 {
        return Err(Error::config("evaluation interval and episodes must be positive"));
    }
    if total % i != 0 {
        return Err(Error::config(format!("evaluation interval {i} does not divide total_steps {total}")));
    }
    Ok((i, e))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let env: EnvKind = raw.env.as_deref().unwrap_or("pendulum").parse()?;
        let algorithm: Algorithm = raw.agent.as_deref().unwrap_or("tawac").parse()?;
        let mode: Mode = match raw.mode.as_deref() {
            Some(m) => m.parse()?,
            None if raw.dataset.is_some()
                || algorithm == Algorithm::Td3bc
                || algorithm == Algorithm::Iql
                || algorithm == Algorithm::Inac =>
            {
                Mode::Offline
            }
            None => Mode::Online,
        };
        let mut agent = match mode {
            Mode::Online => AgentConfig::online(algorithm),
            Mode::Offline => AgentConfig::offline(algorithm),
        };
        if let Some(h) = &raw.hyperparameters {
            macro_rules! set {
                ($($f:ident),*) => { $( if let Some(v) = h.$f.clone() { agent.$f = v; } )* };
            }
            set!(
                tau, q_prime, rho, proposal_samples, expectile, bc_alpha, critic_lr, actor_lr_multiplier, batch_size,
                polyak, gamma, hidden, adam_beta1, adam_beta2, action_samples, max_weight, reparameterize,
                policy_noise, noise_clip, policy_delay
            );
        }
        agent.validate()?;

        let p = raw.policy.clone().unwrap_or_default();
        let family: Family = p.family.as_deref().unwrap_or("gaussian").parse()?;
        let (low, high) = env.action_bounds();
        let mut head = PolicyHeadConfig::new(family, low, high)?;
        if let Some(q) = p.q {
            head.q = q;
        }
        if let Some(v) = p.nu_base {
            head.nu_base = v;
        }
        if let Some(v) = p.replacement_batch {
            head.replacement_batch = v;
        }
        if let Some(v) = p.log_std_min {
            head.log_std_min = v;
        }
        if let Some(v) = p.log_std_max {
            head.log_std_max = v;
        }
        head.validate()?;

        let protocol = match raw.protocol.as_deref().unwrap_or("best") {
            "best" => Protocol::Best,
            "sweep" => Protocol::Sweep,
            other => return Err(Error::config(format!("unknown protocol `{other}`"))),
        };
        let total_steps = raw.total_steps.unwrap_or(100_000);
        if total_steps == 0 {
            return Err(Error::config("total_steps must be positive"));
        }
        let (eval_interval, eval_episodes) = schedule(protocol, raw.eval_interval, raw.eval_episodes, total_steps)?;
        let eval_policy = match raw.eval_policy.as_deref().unwrap_or("mean") {
            "mean" => EvalPolicy::Mean,
            "sample" => EvalPolicy::Sample,
            other => return Err(Error::config(format!("unknown eval_policy `{other}`"))),
        };
        let seeds = raw.seeds.clone().unwrap_or_else(|| vec![0]);
        distinct("seeds", &seeds)?;
        if mode == Mode::Offline && raw.dataset.is_none() {
            return Err(Error::config("offline runs need a `dataset` path"));
        }
        let buffer_capacity = raw.buffer_capacity.unwrap_or(1_000_000);
        if buffer_capacity == 0 {
            return Err(Error::config("buffer_capacity must be positive"));
        }

        let sweep = match &raw.sweep {
            None => None,
            Some(s) => {
                let spec = SweepSpec {
                    critic_lr: s.critic_lr.clone().unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4, 1e-5]),
                    actor_lr_multiplier: s.actor_lr_multiplier.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0]),
                    tau: s.tau.clone().unwrap_or_else(|| vec![0.01, 0.1, 1.0]),
                    sweep_seeds: s.sweep_seeds.clone().unwrap_or_else(|| (100..105).collect()),
                    best_seeds: s.best_seeds.clone().unwrap_or_else(|| (0..10).collect()),
                    sweep_eval: schedule(Protocol::Sweep, s.sweep_eval_interval, s.sweep_eval_episodes, total_steps)?,
                    best_eval: schedule(Protocol::Best, s.best_eval_interval, s.best_eval_episodes, total_steps)?,
                };
                if spec.points().is_empty() {
                    return Err(Error::config("sweep grid is empty"));
                }
                distinct("sweep_seeds", &spec.sweep_seeds)?;
                distinct("best_seeds", &spec.best_seeds)?;
                if spec.sweep_seeds.iter().any(|s| spec.best_seeds.contains(s)) {
                    return Err(Error::config("sweep_seeds and best_seeds must be disjoint"));
                }
                for (lr, m, t) in spec.points() {
                    AgentConfig { critic_lr: lr, actor_lr_multiplier: m, tau: t, ..agent.clone() }.validate()?;
                }
                Some(spec)
            }
        };

        Ok(Self {
            env,
            agent,
            head,
            total_steps,
            eval_interval,
            eval_episodes,
            eval_policy,
            seeds,
            out_dir: PathBuf::from(raw.out_dir.as_deref().unwrap_or("runs")),
            dataset: raw.dataset.as_ref().map(PathBuf::from),
            buffer_capacity,
            sweep,
        })
    }
}
