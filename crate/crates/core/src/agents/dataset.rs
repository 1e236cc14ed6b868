//! Offline datasets.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "QEXPDATA"
//! version      u32      1
//! name_len     u32
//! env name     name_len bytes of UTF-8
//! obs_dim      u32
//! act_dim      u32
//! count        u64
//! records      count × (obs_dim f64 state, act_dim f64 action, f64 reward,
//!                       obs_dim f64 next_state, u8 terminated,
//!                       f64 behavior_log_prob (NaN when unknown))
//! ```

use super::buffer::{ReplayBuffer, Transition};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::samplers::Rng;
use std::io::{Read, Write};

pub const DATASET_MAGIC: &[u8; 8] = b"QEXPDATA";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub env: EnvKind,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn new(env: EnvKind) -> Self {
        Self { env, obs_dim: env.obs_dim(), act_dim: env.action_dim(), transitions: Vec::new() }
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        let name = self.env.name().as_bytes();
        out.write_all(DATASET_MAGIC)?;
        out.write_all(&DATASET_VERSION.to_le_bytes())?;
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name)?;
        out.write_all(&(self.obs_dim as u32).to_le_bytes())?;
        out.write_all(&(self.act_dim as u32).to_le_bytes())?;
        out.write_all(&(self.transitions.len() as u64).to_le_bytes())?;
        let mut rec = Vec::with_capacity(8 * (2 * self.obs_dim + self.act_dim + 2) + 1);
        for t in &self.transitions {
            if t.state.len() != self.obs_dim
                || t.next_state.len() != self.obs_dim
                || t.action.len() != self.act_dim
            {
                return Err(Error::format("transition does not match dataset dimensions"));
            }
            rec.clear();
            for v in t.state.iter().chain(&t.action).chain(std::iter::once(&t.reward)).chain(&t.next_state) {
                rec.extend_from_slice(&v.to_le_bytes());
            }
            rec.push(t.terminated as u8);
            rec.extend_from_slice(&t.behavior_log_prob.unwrap_or(f64::NAN).to_le_bytes());
            out.write_all(&rec)?;
        }
        Ok(())
    }

    pub fn read(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::format("not a dataset file"));
        }
        let version = read_u32(&mut input)?;
        if version != DATASET_VERSION {
            return Err(Error::format(format!("unsupported dataset version {version}")));
        }
        let name_len = read_u32(&mut input)? as usize;
        if name_len > 256 {
            return Err(Error::format("environment name too long"));
        }
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let env: EnvKind = String::from_utf8(name)
            .map_err(|_| Error::format("environment name is not UTF-8"))?
            .parse()
            .map_err(|e: Error| Error::format(e.to_string()))?;
        let obs_dim = read_u32(&mut input)? as usize;
        let act_dim = read_u32(&mut input)? as usize;
        if obs_dim != env.obs_dim() || act_dim != env.action_dim() {
            return Err(Error::format("dimensions do not match the environment"));
        }
        let count = read_u64(&mut input)?;
        let mut transitions = Vec::with_capacity(count.min(1 << 24) as usize);
        let f = |input: &mut dyn Read, n: usize| -> Result<Vec<f64>> {
            (0..n).map(|_| read_f64(input)).collect()
        };
        for _ in 0..count {
            let state = f(&mut input, obs_dim)?;
            let action = f(&mut input, act_dim)?;
            let reward = read_f64(&mut input)?;
            let next_state = f(&mut input, obs_dim)?;
            let mut byte = [0u8; 1];
            input.read_exact(&mut byte)?;
            let b = read_f64(&mut input)?;
            transitions.push(Transition {
                state,
                action,
                reward,
                next_state,
                terminated: byte[0] != 0,
                behavior_log_prob: if b.is_nan() { None } else { Some(b) },
            });
        }
        Ok(Self { env, obs_dim, act_dim, transitions })
    }

    /// Loads every transition into a buffer sized to fit them.
    pub fn to_buffer(&self) -> Result<ReplayBuffer> {
        let mut b = ReplayBuffer::new(self.transitions.len().max(1), self.obs_dim, self.act_dim)?;
        for t in &self.transitions {
            b.push(t)?;
        }
        Ok(b)
    }
}

fn read_u32(r: &mut dyn Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut dyn Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut dyn Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// A behavior policy that can report the log-density of its own actions.
pub trait BehaviorPolicy {
    /// Environment action (already clipped) and its behavior log-density.
    fn act(&mut self, obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)>;
}

/// Uniform actions over the box.
#[derive(Clone, Debug)]
pub struct UniformPolicy {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl BehaviorPolicy for UniformPolicy {
    fn act(&mut self, _obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mut lp = 0.0;
        let a = self
            .low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| {
                lp -= (h - l).ln();
                l + (h - l) * rng.uniform()
            })
            .collect();
        Ok((a, lp))
    }
}

/// Rolls out `behavior` for `n` transitions, resetting on episode end.
pub fn generate_offline_dataset(
    env: EnvKind,
    behavior: &mut dyn BehaviorPolicy,
    n: usize,
    env_rng: &mut Rng,
    policy_rng: &mut Rng,
) -> Result<Dataset> {
    let mut data = Dataset::new(env);
    data.transitions.reserve(n);
    let mut state = env.reset(env_rng);
    while data.transitions.len() < n {
        let obs = state.observation();
        let (action, lp) = behavior.act(&obs, policy_rng)?;
        let r = state.step(&action);
        let done = r.terminated || r.truncated;
        data.transitions.push(Transition {
            state: obs,
            action,
            reward: r.reward,
            next_state: r.next_state,
            terminated: r.terminated,
            behavior_log_prob: Some(lp),
        });
        if done {
            state = env.reset(env_rng);
        }
    }
    Ok(data)
}
