#![allow(dead_code)]

use qexp::agents::{ReplayBuffer, Transition, TransitionRef};
use qexp::distributions::LocScaleParams;
use qexp::nn::MlpParams;
use qexp::policy::{head_forward, Family, PolicyHeadConfig};
use qexp::linalg::CholeskyFactor;
use qexp::samplers::{Rng, StreamPurpose};

pub fn rng(seed: u64) -> Rng {
    Rng::stream(7, seed, StreamPurpose::Validation)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Random location and lower-triangular factor with a well-conditioned
/// diagonal.
pub fn random_loc_scale(rng: &mut Rng, n: usize, full: bool) -> LocScaleParams {
    let mu = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = if i == j {
                uniform(rng, 0.5, 1.5)
            } else if full {
                uniform(rng, -0.3, 0.3)
            } else {
                0.0
            };
        }
    }
    let chol = if full {
        CholeskyFactor::from_lower(n, l).unwrap()
    } else {
        CholeskyFactor::from_diagonal(&(0..n).map(|i| l[i * n + i]).collect::<Vec<_>>()).unwrap()
    };
    LocScaleParams::new(mu, chol).unwrap()
}

/// `μ + L z` for a given standardized offset.
pub fn offset(ls: &LocScaleParams, z: &[f64]) -> Vec<f64> {
    ls.scale_chol.mul_vec(z).iter().zip(&ls.mu).map(|(a, b)| a + b).collect()
}

/// Standardized offset with every coordinate in `±half`.
pub fn random_offset(rng: &mut Rng, n: usize, half: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, -half, half)).collect()
}

/// Same parameters with the lower-triangular factor replaced.
pub fn with_lower(ls: &LocScaleParams, lower: &[f64]) -> LocScaleParams {
    let n = ls.dim();
    LocScaleParams::new(ls.mu.clone(), CholeskyFactor::from_lower(n, lower.to_vec()).unwrap())
        .unwrap()
}

pub fn lower_indices(n: usize) -> Vec<usize> {
    (0..n).flat_map(|i| (0..=i).map(move |j| i * n + j)).collect()
}

pub const FAMILIES: [(Family, f64); 6] = [
    (Family::Gaussian, 0.0),
    (Family::SquashedGaussian, 0.0),
    (Family::Beta, 0.0),
    (Family::StudentT, 0.0),
    (Family::QGaussian, 0.0),
    (Family::QGaussian, 1.5),
];

pub fn heads() -> Vec<PolicyHeadConfig> {
    FAMILIES.iter().map(|(f, q)| {
        let h = PolicyHeadConfig::new(*f, vec![-2.0], vec![2.0]).unwrap();
        if *f == Family::QGaussian { h.with_q(*q).unwrap() } else { h }
    }).collect()
}

/// A 4-transition batch whose actions sit strictly inside every family's
/// support at the actor's current parameters.
pub fn fixture(actor: &MlpParams, head: &PolicyHeadConfig, rng: &mut Rng) -> Vec<Transition> {
    (0..4)
        .map(|_| {
            let s = vec![rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0];
            let out = head_forward(head, &actor.predict(&s).unwrap()).unwrap();
            let mode = out.dist.mode_action();
            let x: Vec<f64> = out.dist.sample(rng).iter().zip(&mode).map(|(a, m)| m + 0.5 * (a - m)).collect();
            Transition {
                action: head.clip(&head.to_env(&x)),
                state: s.clone(),
                reward: rng.normal(),
                next_state: s,
                terminated: false,
                behavior_log_prob: Some(-1.0 - rng.uniform()),
            }
        })
        .collect()
}

pub fn refs(ts: &[Transition]) -> Vec<TransitionRef<'_>> {
    ts.iter()
        .map(|t| TransitionRef {
            state: &t.state,
            action: &t.action,
            reward: t.reward,
            next_state: &t.next_state,
            terminated: t.terminated,
            behavior_log_prob: t.behavior_log_prob,
        })
        .collect()
}

/// Deterministic chain s0 → s1 → s2 → end with unit rewards and one-hot
/// states; the only action is 0.
pub fn chain(n: usize) -> (ReplayBuffer, Vec<f64>) {
    let one_hot = |i: usize| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let mut b = ReplayBuffer::new(n, n, 1).unwrap();
    for i in 0..n {
        b.push(&Transition {
            state: one_hot(i),
            action: vec![0.0],
            reward: 1.0,
            next_state: one_hot((i + 1) % n),
            terminated: i + 1 == n,
            behavior_log_prob: None,
        })
        .unwrap();
    }
    let values = (0..n).map(|i| (0..n - i).map(|k| 0.99f64.powi(k as i32)).sum()).collect();
    (b, values)
}

