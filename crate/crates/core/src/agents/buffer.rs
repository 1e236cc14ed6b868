use crate::error::{check_dim, Error, Result};
use crate::samplers::Rng;

/// One environment transition. Actions are stored in environment units.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminated: bool,
    /// Log-density of the behavior policy at `action`, when known.
    pub behavior_log_prob: Option<f64>,
}

/// Borrowed view of a stored transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionRef<'a> {
    pub state: &'a [f64],
    pub action: &'a [f64],
    pub reward: f64,
    pub next_state: &'a [f64],
    pub terminated: bool,
    pub behavior_log_prob: Option<f64>,
}

impl TransitionRef<'_> {
    pub fn to_owned(&self) -> Transition {
        Transition {
            state: self.state.to_vec(),
            action: self.action.to_vec(),
            reward: self.reward,
            next_state: self.next_state.to_vec(),
            terminated: self.terminated,
            behavior_log_prob: self.behavior_log_prob,
        }
    }
}

/// Fixed-capacity ring buffer with flat storage and uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    len: usize,
    cursor: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    terminated: Vec<bool>,
    behavior: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 || obs_dim == 0 || act_dim == 0 {
            return Err(Error::domain("replay buffer sizes must be positive"));
        }
        Ok(Self {
            obs_dim,
            act_dim,
            capacity,
            len: 0,
            cursor: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            terminated: Vec::new(),
            behavior: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Inserts a transition, overwriting the oldest once full.
    pub fn push(&mut self, t: &Transition) -> Result<()> {
        check_dim(self.obs_dim, t.state.len())?;
        check_dim(self.obs_dim, t.next_state.len())?;
        check_dim(self.act_dim, t.action.len())?;
        let finite = t.state.iter().chain(&t.action).chain(&t.next_state).all(|v| v.is_finite());
        if !finite || !t.reward.is_finite() {
            return Err(Error::domain("transition fields must be finite"));
        }
        let (o, a) = (self.obs_dim, self.act_dim);
        let bl = t.behavior_log_prob.unwrap_or(f64::NAN);
        if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.terminated.push(t.terminated);
            self.behavior.push(bl);
            self.len += 1;
        } else {
            let i = self.cursor;
            self.states[i * o..(i + 1) * o].copy_from_slice(&t.state);
            self.actions[i * a..(i + 1) * a].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_states[i * o..(i + 1) * o].copy_from_slice(&t.next_state);
            self.terminated[i] = t.terminated;
            self.behavior[i] = bl;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> TransitionRef<'_> {
        assert!(i < self.len, "index {i} out of range for buffer of {}", self.len);
        let (o, a) = (self.obs_dim, self.act_dim);
        let b = self.behavior[i];
        TransitionRef {
            state: &self.states[i * o..(i + 1) * o],
            action: &self.actions[i * a..(i + 1) * a],
            reward: self.rewards[i],
            next_state: &self.next_states[i * o..(i + 1) * o],
            terminated: self.terminated[i],
            behavior_log_prob: if b.is_nan() { None } else { Some(b) },
        }
    }

    /// `batch` indices drawn uniformly with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.len < batch || batch == 0 {
            return Err(Error::InsufficientData { needed: batch.max(1), have: self.len });
        }
        Ok((0..batch).map(|_| rng.index(self.len)).collect())
    }

    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<Vec<TransitionRef<'_>>> {
        Ok(self.sample_indices(batch, rng)?.into_iter().map(|i| self.get(i)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = TransitionRef<'_>> {
        (0..self.len).map(|i| self.get(i))
    }
}
