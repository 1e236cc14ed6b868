//! Classic-control tasks with continuous actions.
//!
//! * `mountain_car_cost`: reward −1 per step until the car reaches
//!   `x ≥ 0.45`. Force in `[-1, 1]`, power 0.0015, hill term
//!   `-0.0025·cos(3x)`, velocity clipped to ±0.07, position to
//!   `[-1.2, 0.6]` with an inelastic left wall. Starts at `x ~ U[-0.6, -0.4]`,
//!   `v = 0`. Observation `((x + 0.3)/0.9, v/0.07)`.
//! * `pendulum`: torque in `[-2, 2]`, `g = 10`, `m = l = 1`, `dt = 0.05`,
//!   angular speed clipped to ±8, semi-implicit Euler. `θ = 0` is upright.
//!   Reward `-(θ² + 0.1·θ̇² + 0.001·u²)` on the pre-step state with `θ`
//!   wrapped to `[-π, π]`. Starts at `θ ~ U[-π, π]`, `θ̇ ~ U[-1, 1]`.
//!   Observation `(cos θ, sin θ, θ̇/8)`. Never terminates.
//! * `acrobot_continuous`: two unit links, unit masses, centres of mass at
//!   0.5, unit inertia, `g = 9.8`, torque in `[-1, 1]` on the middle joint,
//!   one RK4 step of `dt = 0.2`, joint speeds clipped to ±4π and ±9π.
//!   Reward −1 per step until the tip height `-cos θ₁ - cos(θ₁+θ₂)` exceeds
//!   one. Starts with all four state entries `~ U[-0.1, 0.1]`. Observation
//!   `(cos θ₁, sin θ₁, cos θ₂, sin θ₂, θ̇₁/4π, θ̇₂/9π)`.
//!
//! Every episode is truncated after 1000 steps.

use crate::error::{Error, Result};
use crate::samplers::Rng;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub const MAX_EPISODE_STEPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvKind {
    MountainCarCost,
    Pendulum,
    AcrobotContinuous,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [Self::MountainCarCost, Self::Pendulum, Self::AcrobotContinuous];

    pub fn name(self) -> &'static str {
        match self {
            Self::MountainCarCost => "mountain_car_cost",
            Self::Pendulum => "pendulum",
            Self::AcrobotContinuous => "acrobot_continuous",
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Self::MountainCarCost => 2,
            Self::Pendulum => 3,
            Self::AcrobotContinuous => 6,
        }
    }

    pub fn action_dim(self) -> usize {
        1
    }

    pub fn action_bounds(self) -> (Vec<f64>, Vec<f64>) {
        let m = if self == Self::Pendulum { 2.0 } else { 1.0 };
        (vec![-m], vec![m])
    }

    pub fn reset(self, rng: &mut Rng) -> EnvState {
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
        let values = match self {
            Self::MountainCarCost => vec![u(-0.6, -0.4), 0.0],
            Self::Pendulum => vec![u(-PI, PI), u(-1.0, 1.0)],
            Self::AcrobotContinuous => (0..4).map(|_| u(-0.1, 0.1)).collect(),
        };
        EnvState { kind: self, values, steps: 0 }
    }

    /// State with given physical values, for tests and replays.
    pub fn state_from(self, values: Vec<f64>) -> Result<EnvState> {
        let want = match self {
            Self::MountainCarCost | Self::Pendulum => 2,
            Self::AcrobotContinuous => 4,
        };
        if values.len() != want || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("{self} state needs {want} finite values")));
        }
        Ok(EnvState { kind: self, values, steps: 0 })
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown environment {s:?}")))
    }
}

/// Physical state and step counter of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    kind: EnvKind,
    /// Mountain car `(x, v)`, pendulum `(θ, θ̇)`, acrobot `(θ₁, θ₂, θ̇₁, θ̇₂)`.
    pub values: Vec<f64>,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Pendulum reward for a state and an already clipped torque.
pub fn pendulum_reward(theta: f64, theta_dot: f64, torque: f64) -> f64 {
    let th = angle_normalize(theta);
    -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
}

impl EnvState {
    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    /// Agent-facing observation, with every component scaled to roughly `[-1, 1]`.
    pub fn observation(&self) -> Vec<f64> {
        let s = &self.values;
        match self.kind {
            EnvKind::MountainCarCost => vec![(s[0] + 0.3) / 0.9, s[1] / 0.07],
            EnvKind::Pendulum => vec![s[0].cos(), s[0].sin(), s[1] / 8.0],
            EnvKind::AcrobotContinuous => vec![
                s[0].cos(),
                s[0].sin(),
                s[1].cos(),
                s[1].sin(),
                s[2] / (4.0 * PI),
                s[3] / (9.0 * PI),
            ],
        }
    }

    /// Advances one step; the action is clipped to the bounds first.
    pub fn step(&mut self, action: &[f64]) -> StepResult {
        let (lo, hi) = self.kind.action_bounds();
        let a = action.first().copied().unwrap_or(0.0);
        let a = if a.is_nan() { 0.0 } else { a.clamp(lo[0], hi[0]) };
        let s = &mut self.values;
        let (reward, terminated) = match self.kind {
            EnvKind::MountainCarCost => {
                let (mut x, mut v) = (s[0], s[1]);
                v = (v + a * 0.0015 - 0.0025 * (3.0 * x).cos()).clamp(-0.07, 0.07);
                x = (x + v).clamp(-1.2, 0.6);
                if x == -1.2 && v < 0.0 {
                    v = 0.0;
                }
                s[0] = x;
                s[1] = v;
                (-1.0, x >= 0.45)
            }
            EnvKind::Pendulum => {
                let (th, thd) = (s[0], s[1]);
                let r = pendulum_reward(th, thd, a);
                let dt = 0.05;
                let new_thd = (thd + (3.0 * 10.0 / 2.0 * th.sin() + 3.0 * a) * dt).clamp(-8.0, 8.0);
                s[0] = th + new_thd * dt;
                s[1] = new_thd;
                (r, false)
            }
            EnvKind::AcrobotContinuous => {
                let next = rk4(&[s[0], s[1], s[2], s[3]], a, 0.2);
                s[0] = angle_normalize(next[0]);
                s[1] = angle_normalize(next[1]);
                s[2] = next[2].clamp(-4.0 * PI, 4.0 * PI);
                s[3] = next[3].clamp(-9.0 * PI, 9.0 * PI);
                (-1.0, -s[0].cos() - (s[0] + s[1]).cos() > 1.0)
            }
        };
        self.steps += 1;
        StepResult {
            next_state: self.observation(),
            reward,
            terminated,
            truncated: !terminated && self.steps >= MAX_EPISODE_STEPS,
        }
    }
}

fn acrobot_derivs(s: &[f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2, i1, i2, g) = (1.0, 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 9.8);
    let [t1, t2, dt1, dt2] = *s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (t1 + t2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dt2 * dt2 * t2.sin() - 2.0 * m2 * l1 * lc2 * dt2 * dt1 * t2.sin()
        + (m1 * lc1 + m2 * l1) * g * (t1 - PI / 2.0).cos()
        + phi2;
    let ddt2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * t2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddt1 = -(d2 * ddt2 + phi1) / d1;
    [dt1, dt2, ddt1, ddt2]
}

fn rk4(s: &[f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], b: &[f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
    };
    let k1 = acrobot_derivs(s, torque);
    let k2 = acrobot_derivs(&add(s, &k1, dt / 2.0), torque);
    let k3 = acrobot_derivs(&add(s, &k2, dt / 2.0), torque);
    let k4 = acrobot_derivs(&add(s, &k3, dt), torque);
    let mut out = *s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::StreamPurpose;

    fn rng(seed: u64) -> Rng {
        Rng::stream(0, seed, StreamPurpose::Environment)
    }

    #[test]
    fn mountain_car_costs_one_per_step() {
        let mut s = EnvKind::MountainCarCost.reset(&mut rng(1));
        let r = s.step(&[0.3]);
        assert_eq!(r.reward, -1.0);
        assert!(!r.terminated);
        let mut g = EnvKind::MountainCarCost.state_from(vec![0.449, 0.05]).unwrap();
        assert!(g.step(&[1.0]).terminated);
    }

    #[test]
    fn pendulum_upright_at_rest_has_zero_reward() {
        let mut s = EnvKind::Pendulum.state_from(vec![0.0, 0.0]).unwrap();
        let r = s.step(&[0.0]);
        assert_eq!(r.reward, 0.0);
        assert_eq!(s.values, vec![0.0, 0.0]);
    }

    #[test]
    fn pendulum_reward_uses_wrapped_angle_and_clipped_torque() {
        let mut s = EnvKind::Pendulum.state_from(vec![2.0 * PI + 0.5, 1.0]).unwrap();
        let r = s.step(&[5.0]);
        assert!((r.reward + (0.25 + 0.1 + 0.004)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_trajectory() {
        for kind in EnvKind::ALL {
            let run = || {
                let mut s = kind.reset(&mut rng(7));
                let mut act = rng(8);
                (0..300).map(|_| s.step(&[2.0 * act.uniform() - 1.0])).collect::<Vec<_>>()
            };
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn truncates_at_limit() {
        for kind in EnvKind::ALL {
            let mut s = kind.reset(&mut rng(3));
            let mut n = 0;
            loop {
                n += 1;
                let r = s.step(&[0.0]);
                assert!(r.reward.is_finite());
                if r.terminated || r.truncated {
                    assert!(r.terminated || n == MAX_EPISODE_STEPS);
                    break;
                }
            }
            assert!(n <= MAX_EPISODE_STEPS);
        }
    }

    #[test]
    fn acrobot_at_rest_hanging_stays() {
        let mut s = EnvKind::AcrobotContinuous.state_from(vec![0.0; 4]).unwrap();
        for _ in 0..10 {
            assert!(!s.step(&[0.0]).terminated);
        }
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn acrobot_energy_conserved_without_torque() {
        // Kinetic plus potential energy for the unactuated double pendulum.
        let energy = |s: &[f64]| {
            let (t1, t2, d1, d2) = (s[0], s[1], s[2], s[3]);
            let v1 = 0.5 * (0.25 + 1.0) * d1 * d1;
            let v2 = 0.5 * (d1 * d1 * (1.0 + 0.25 + t2.cos()) + d2 * d2 * 0.25 + 2.0 * d1 * d2 * (0.25 + 0.5 * t2.cos()))
                + 0.5 * (d1 + d2) * (d1 + d2);
            let p = -9.8 * (0.5 * t1.cos() + t1.cos() + 0.5 * (t1 + t2).cos());
            v1 + v2 + p
        };
        let mut s = EnvKind::AcrobotContinuous.state_from(vec![0.5, -0.3, 0.0, 0.0]).unwrap();
        let e0 = energy(&s.values);
        for _ in 0..20 {
            s.step(&[0.0]);
        }
        assert!((energy(&s.values) - e0).abs() / e0.abs() < 1e-2, "{} vs {e0}", energy(&s.values));
    }

    #[test]
    fn names_round_trip() {
        for k in EnvKind::ALL {
            assert_eq!(k.name().parse::<EnvKind>().unwrap(), k);
        }
        assert!("cartpole".parse::<EnvKind>().is_err());
    }
}
