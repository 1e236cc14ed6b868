use super::config::{EvalPolicy, ExperimentConfig};
use super::report::write_eval_csv;
use crate::agents::{
    generate_offline_dataset, ActorBehavior, Agent, Dataset, Mode, ReplayBuffer, Transition, UniformPolicy,
};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::nn::{read_checkpoint, write_checkpoint};
use crate::samplers::{Rng, StreamPurpose};
use rayon::prelude::*;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// One evaluation point of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    pub seed: u64,
    pub ret: f64,
    pub seconds: f64,
}

/// Mean undiscounted return of `episodes` full episodes. The agent is only
/// borrowed, so its parameters cannot change.
pub fn evaluate(agent: &Agent, env: EnvKind, episodes: usize, policy: EvalPolicy, rng: &mut Rng) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        loop {
            let obs = state.observation();
            let a = match policy {
                EvalPolicy::Mean => agent.act_greedy(&obs)?,
                EvalPolicy::Sample => agent.act(&obs, rng)?,
            };
            let r = state.step(&a);
            total += r.reward;
            if r.terminated || r.truncated {
                break;
            }
        }
    }
    Ok(total / episodes as f64)
}

/// Result of one seed: its evaluation curve and the trained agent.
pub struct RunOutcome {
    pub records: Vec<EvalRecord>,
    pub agent: Agent,
}

/// Trains one seed. `on_eval` sees every evaluation record and may stop the
/// run early by returning `false`. Offline runs read from `data`.
pub fn train_run(
    cfg: &ExperimentConfig,
    seed: u64,
    data: Option<&ReplayBuffer>,
    mut on_eval: impl FnMut(&EvalRecord) -> bool,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let stream = |p| Rng::stream(0, seed, p);
    let (mut init, mut explore, mut update, mut eval, mut env_rng) = (
        stream(StreamPurpose::Init),
        stream(StreamPurpose::Exploration),
        stream(StreamPurpose::Update),
        stream(StreamPurpose::Evaluation),
        stream(StreamPurpose::Environment),
    );
    let mut agent = Agent::new(cfg.agent.clone(), cfg.head.clone(), cfg.env.obs_dim(), &mut init)?;
    let offline = cfg.agent.mode == Mode::Offline;
    let mut buffer = if offline {
        None
    } else {
        Some(ReplayBuffer::new(cfg.buffer_capacity, cfg.env.obs_dim(), cfg.env.action_dim())?)
    };
    let data = match (&buffer, data) {
        (None, Some(d)) => Some(d),
        (None, None) => return Err(Error::config("offline runs need a dataset")),
        _ => None,
    };
    let mut state = cfg.env.reset(&mut env_rng);
    let mut records = Vec::new();
    for step in 1..=cfg.total_steps {
        if let Some(buf) = buffer.as_mut() {
            let obs = state.observation();
            let action = agent.act(&obs, &mut explore)?;
            let r = state.step(&action);
            buf.push(&Transition {
                state: obs,
                action,
                reward: r.reward,
                next_state: r.next_state,
                terminated: r.terminated,
                behavior_log_prob: None,
            })?;
            if r.terminated || r.truncated {
                state = cfg.env.reset(&mut env_rng);
            }
            if buf.len() >= cfg.agent.batch_size {
                agent.update(buf, &mut update)?;
            }
        } else if let Some(d) = data {
            agent.update(d, &mut update)?;
        }
        if step % cfg.eval_interval == 0 {
            let ret = evaluate(&agent, cfg.env, cfg.eval_episodes, cfg.eval_policy, &mut eval)?;
            if !ret.is_finite() {
                return Err(Error::domain(format!("non-finite evaluation return at step {step}")));
            }
            let rec = EvalRecord { step, seed, ret, seconds: start.elapsed().as_secs_f64() };
            let go_on = on_eval(&rec);
            records.push(rec);
            if !go_on {
                break;
            }
        }
    }
    Ok(RunOutcome { records, agent })
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Option<ReplayBuffer>> {
    if cfg.agent.mode != Mode::Offline {
        return Ok(None);
    }
    let path = cfg.dataset.as_ref().ok_or_else(|| Error::config("offline runs need a `dataset` path"))?;
    let data = Dataset::read(BufReader::new(fs::File::open(path)?))?;
    if data.env != cfg.env {
        return Err(Error::config(format!("dataset was generated on {}, not {}", data.env, cfg.env)));
    }
    Ok(Some(data.to_buffer()?))
}

/// Trains every configured seed in parallel. Each seed gets
/// `out/seed-N/{eval.csv, checkpoint.txt, config.toml}`, the last being
/// `config_text` verbatim.
pub fn run_train(cfg: &ExperimentConfig, config_text: &str, out: &Path) -> Result<Vec<Vec<EvalRecord>>> {
    let data = load_dataset(cfg)?;
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let dir = seed_dir(out, seed);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("config.toml"), config_text)?;
            let run = train_run(cfg, seed, data.as_ref(), |_| true)?;
            write_eval_csv(&dir.join("eval.csv"), &run.records)?;
            let nets = run.agent.networks();
            let named: Vec<(&str, &crate::nn::MlpParams)> = nets.iter().map(|(n, p)| (n.as_str(), *p)).collect();
            let mut w = BufWriter::new(fs::File::create(dir.join("checkpoint.txt"))?);
            write_checkpoint(&mut w, &named)?;
            w.flush()?;
            Ok(run.records)
        })
        .collect()
}

/// The agent described by `cfg` with its networks restored from a
/// `checkpoint.txt` written by [`run_train`].
pub fn load_agent(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<Agent> {
    let mut init = Rng::stream(0, 0, StreamPurpose::Init);
    let mut agent = Agent::new(cfg.agent.clone(), cfg.head.clone(), cfg.env.obs_dim(), &mut init)?;
    agent.load_networks(read_checkpoint(BufReader::new(fs::File::open(checkpoint)?))?)?;
    Ok(agent)
}

/// `n` transitions on `env` from the agent's stochastic actor, or from a
/// uniform policy over the action box when no agent is given.
pub fn behavior_dataset(env: EnvKind, agent: Option<&Agent>, n: usize, seed: u64) -> Result<Dataset> {
    let mut env_rng = Rng::stream(0, seed, StreamPurpose::Environment);
    let mut policy_rng = Rng::stream(0, seed, StreamPurpose::Dataset);
    match agent {
        Some(a) => {
            if a.obs_dim() != env.obs_dim() || a.action_dim() != env.action_dim() {
                return Err(Error::config(format!("checkpoint does not match {env}")));
            }
            generate_offline_dataset(env, &mut ActorBehavior { actor: &a.actor }, n, &mut env_rng, &mut policy_rng)
        }
        None => {
            let (low, high) = env.action_bounds();
            generate_offline_dataset(env, &mut UniformPolicy { low, high }, n, &mut env_rng, &mut policy_rng)
        }
    }
}
