//! Quick numerical self-check behind `qexp validate`: deformed-function
//! round trips, density normalization, sampler fit, likelihood gradients
//! and sparsemax, each against an independent oracle.

use crate::deformed::{exp_q, ln_q};
use crate::distributions::{
    sparsemax, BetaParams, LocScaleParams, ParamGrad, PolicyDistribution, QGaussianParams, SparsemaxInput,
    StudentTParams,
};
use crate::error::Result;
use crate::oracles::{
    finite_diff_gradient, integrate, ks_test_density, max_relative_error, project_simplex_bruteforce,
};
use crate::samplers::{Rng, StreamPurpose};

/// One line of the report; a check passes when `statistic < threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self { check: check.into(), statistic, threshold, pass: statistic < threshold }
    }
}

/// Parameter vector for a one-dimensional case and the map back to a
/// distribution.
struct Case {
    name: &'static str,
    params: Vec<f64>,
    build: fn(&[f64]) -> Result<PolicyDistribution>,
    support: (f64, f64),
}

fn loc_scale(p: &[f64]) -> Result<LocScaleParams> {
    LocScaleParams::scalar(p[0], p[1])
}

fn q_gaussian(p: &[f64], q: f64) -> Result<PolicyDistribution> {
    Ok(PolicyDistribution::QGaussian(QGaussianParams::new(loc_scale(p)?, q)?))
}

fn light_radius(mu: f64, sigma: f64, q: f64) -> (f64, f64) {
    let r = sigma * (2.0 / (1.0 - q)).sqrt() - 1e-12;
    (mu - r, mu + r)
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "gaussian",
            params: vec![0.3, 0.7],
            build: |p| Ok(PolicyDistribution::Gaussian(loc_scale(p)?)),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        },
        Case {
            name: "squashed_gaussian",
            params: vec![0.2, 0.8],
            build: |p| Ok(PolicyDistribution::SquashedGaussian(loc_scale(p)?)),
            support: (-1.0, 1.0),
        },
        Case {
            name: "student_t",
            params: vec![0.1, 1.2, 3.0],
            build: |p| Ok(PolicyDistribution::StudentT(StudentTParams::new(loc_scale(p)?, p[2])?)),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        },
        Case {
            name: "q_gaussian_q0",
            params: vec![-0.2, 0.9],
            build: |p| q_gaussian(p, 0.0),
            support: light_radius(-0.2, 0.9, 0.0),
        },
        Case {
            name: "q_gaussian_q0.5",
            params: vec![0.4, 0.6],
            build: |p| q_gaussian(p, 0.5),
            support: light_radius(0.4, 0.6, 0.5),
        },
        Case {
            name: "q_gaussian_q1.5",
            params: vec![0.0, 1.1],
            build: |p| q_gaussian(p, 1.5),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        },
        Case {
            name: "q_gaussian_q2",
            params: vec![0.5, 0.8],
            build: |p| q_gaussian(p, 2.0),
            support: (f64::NEG_INFINITY, f64::INFINITY),
        },
        Case {
            name: "beta",
            params: vec![2.5, 1.5],
            build: |p| {
                Ok(PolicyDistribution::Beta(BetaParams::new(vec![p[0]], vec![p[1]], vec![-2.0], vec![2.0])?))
            },
            support: (-2.0, 2.0),
        },
    ]
}

fn density(d: &PolicyDistribution) -> impl Fn(f64) -> f64 + '_ {
    move |x| d.log_prob(&[x]).map_or(0.0, f64::exp)
}

/// Flattens a gradient into the order of [`Case::params`].
fn flat_grad(d: &PolicyDistribution, g: ParamGrad) -> Vec<f64> {
    match (d, g) {
        (PolicyDistribution::Gaussian(p), ParamGrad::LocScale(g))
        | (PolicyDistribution::SquashedGaussian(p), ParamGrad::LocScale(g)) => {
            vec![g.mu[0], g.diag_scale(&p.scale_chol)[0]]
        }
        (PolicyDistribution::QGaussian(p), ParamGrad::LocScale(g)) => {
            vec![g.mu[0], g.diag_scale(&p.loc_scale.scale_chol)[0]]
        }
        (PolicyDistribution::StudentT(p), ParamGrad::StudentT(g)) => {
            vec![g.loc_scale.mu[0], g.loc_scale.diag_scale(&p.loc_scale.scale_chol)[0], g.nu]
        }
        (_, ParamGrad::Beta(g)) => vec![g.alpha[0], g.beta[0]],
        _ => unreachable!("gradient kind always matches the family"),
    }
}

/// Runs every check. `samples` draws per sampler fit.
pub fn run_validation(seed: u64, samples: usize) -> Result<Vec<CheckRow>> {
    let mut rng = Rng::stream(0, seed, StreamPurpose::Validation);
    let mut rows = Vec::new();

    let mut worst = 0.0f64;
    for q in [0.0, 0.5, 1.0, 1.5, 2.0] {
        for i in 0..=36 {
            let x = -0.9 + 0.05 * i as f64;
            worst = worst.max((ln_q(exp_q(x, q), q)? - x).abs());
        }
    }
    rows.push(CheckRow::new("ln_q_exp_q_round_trip", worst, 1e-10));

    for case in cases() {
        let d = (case.build)(&case.params)?;
        let mass = integrate(density(&d), case.support.0, case.support.1, 1e-12).value;
        rows.push(CheckRow::new(format!("mass_{}", case.name), (mass - 1.0).abs(), 1e-4));

        let xs: Vec<f64> = (0..samples).map(|_| d.sample(&mut rng)[0]).collect();
        let ks = ks_test_density(&xs, density(&d))?;
        rows.push(CheckRow::new(format!("ks_{}", case.name), ks.statistic, ks.threshold));

        let mut err = 0.0f64;
        for _ in 0..20 {
            let a = d.sample(&mut rng);
            let analytic = flat_grad(&d, d.grad_log_prob(&a)?);
            let fd = finite_diff_gradient(
                |p| (case.build)(p).and_then(|d| d.log_prob(&a)).unwrap_or(f64::NAN),
                &case.params,
                1e-6,
            )?;
            err = err.max(max_relative_error(&analytic, &fd, 1e-2));
        }
        rows.push(CheckRow::new(format!("gradient_{}", case.name), err, 1e-5));
    }

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = 2 + rng.index(9);
        let v: Vec<f64> = (0..len).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let fast = sparsemax(&SparsemaxInput::new(v.clone(), 1.0)?);
        let slow = project_simplex_bruteforce(&v)?;
        worst = fast.iter().zip(&slow).fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    rows.push(CheckRow::new("sparsemax_vs_bruteforce", worst, 1e-9));
    Ok(rows)
}
