//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! a numerical criterion (1–7, 10) fails. The learning criteria (8, 9) are
//! reported but never fail the process: their outcome depends on seeds and
//! budget, not on correctness alone.
//!
//! `QEXP_ACCEPT=1,5,10` runs a subset.

mod common;

use common::*;
use qexp::agents::{
    awac_loss, critic_td_step, inac_loss, tawac_loss, td3bc_actor_loss, AgentConfig, Algorithm, Critics, Net,
    ReplayBuffer, TransitionRef,
};
use qexp::distributions::*;
use qexp::envs::EnvKind;
use qexp::harness::{behavior_dataset, load_dataset, train_run, ExperimentConfig};
use qexp::nn::{AdamConfig, MlpParams};
use qexp::oracles::{
    chi2_test, finite_diff_gradient, importance_normalization, integrate_adaptive, ks_test_density,
    max_relative_error, project_simplex_bruteforce, two_sample_ks, FitTestResult, QuadratureSpec,
};
use qexp::policy::{head_backward, head_forward, Family, PolicyHeadConfig, PolicyHeadOutput};
use qexp::samplers::*;
use qexp::special::{digamma, log_gamma};
use qexp::{exp_q, gbmm_index_inverse, gbmm_index_map, ln_q};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    gating: bool,
    run: fn() -> Outcome,
}

const fn minutes(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, title: "math kernels", budget: Some(Duration::from_secs(5)), gating: true, run: math_kernels },
    Criterion { id: 2, title: "density normalization", budget: minutes(2), gating: true, run: densities },
    Criterion { id: 3, title: "analytic gradients", budget: minutes(2), gating: true, run: gradients },
    Criterion { id: 4, title: "sampler fit", budget: minutes(3), gating: true, run: samplers },
    Criterion { id: 5, title: "sparsemax", budget: Some(Duration::from_secs(5)), gating: true, run: sparsemax_suite },
    Criterion { id: 6, title: "equivalences", budget: Some(Duration::from_secs(30)), gating: true, run: equivalences },
    Criterion { id: 7, title: "TD on a 3-state chain", budget: Some(Duration::from_secs(30)), gating: true, run: td_chain },
    Criterion { id: 8, title: "online learning", budget: None, gating: false, run: online_learning },
    Criterion { id: 9, title: "offline pipeline", budget: minutes(60), gating: false, run: offline_pipeline },
    Criterion { id: 10, title: "reproducible train runs", budget: None, gating: true, run: reproducibility },
];

fn selected() -> Vec<u32> {
    match std::env::var("QEXP_ACCEPT") {
        Ok(s) if !s.trim().is_empty() => s.split(',').filter_map(|t| t.trim().parse().ok()).collect(),
        _ => (1..=10).collect(),
    }
}

fn main() -> ExitCode {
    let wanted = selected();
    let mut failed = false;
    for c in CRITERIA.iter().filter(|c| wanted.contains(&c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        let took = start.elapsed();
        let in_budget = c.budget.map_or(true, |b| took <= b);
        let pass = result.pass && in_budget;
        let budget = c.budget.map_or(String::new(), |b| format!(" of {} s", b.as_secs()));
        let note = if !pass && !c.gating { " [not gating]" } else { "" };
        println!(
            "criterion {}: {} {} ({}; {:.1} s{budget}){note}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            result.detail,
            took.as_secs_f64()
        );
        failed |= !pass && c.gating;
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

/// Tracks the largest error seen against a tolerance.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, at: String::new() }
    }

    fn see(&mut self, e: f64, at: impl FnOnce() -> String) {
        if e > self.value || e.is_nan() {
            self.value = if e.is_nan() { f64::INFINITY } else { e };
            self.at = at();
        }
    }

    fn below(&self, tol: f64) -> bool {
        self.value < tol
    }

    fn show(&self) -> String {
        if self.at.is_empty() {
            format!("{:.1e}", self.value)
        } else {
            format!("{:.1e} at {}", self.value, self.at)
        }
    }
}

// 1 ------------------------------------------------------------------------

fn math_kernels() -> Outcome {
    let mut round = Worst::new();
    for q in [-1.0, 0.0, 0.5, 0.9, 1.0, 1.1, 1.5, 2.0, 2.5] {
        for i in 0..=1000 {
            let x = -5.0 + 0.01 * i as f64;
            let y = exp_q(x, q);
            if y > 0.0 && y.is_finite() {
                round.see((ln_q(y, q).unwrap() - x).abs(), || format!("ln_q(exp_q({x:.2}), {q})"));
            }
            let y = 10f64.powf(-2.0 + 0.004 * i as f64);
            let back = exp_q(ln_q(y, q).unwrap(), q);
            round.see((back - y).abs() / y, || format!("exp_q(ln_q({y:.3e}), {q})"));
        }
    }

    let mut cont = Worst::new();
    for i in 0..=100 {
        let x = -5.0 + 0.1 * i as f64;
        let y = 10f64.powf(-2.0 + 0.04 * i as f64);
        for q in [1.0 - 1e-6, 1.0 + 1e-6] {
            cont.see((exp_q(x, q) / x.exp() - 1.0).abs(), || format!("exp_q({x:.1}, {q})"));
            cont.see((ln_q(y, q).unwrap() - y.ln()).abs(), || format!("ln_q({y:.2e}, {q})"));
        }
    }

    let mut index = Worst::new();
    for i in 0..=4000 {
        let qp = -0.999 + 3.998 * i as f64 / 4000.0;
        let q = gbmm_index_inverse(qp).unwrap();
        index.see((gbmm_index_map(q).unwrap().get() - qp).abs(), || format!("q'={qp}"));
        let q = -0.9 + 10.0 * i as f64 / 4000.0;
        let there = gbmm_index_map(q).unwrap();
        index.see((gbmm_index_inverse(there).unwrap().get() - q).abs(), || format!("q={q}"));
    }

    let mut special = Worst::new();
    for i in 0..=600 {
        let x = 10f64.powf(-3.0 + 0.01 * i as f64);
        let rg = statrs::function::gamma::ln_gamma(x);
        special.see((log_gamma(x).unwrap() - rg).abs() / rg.abs().max(1.0), || format!("log_gamma({x:.3e})"));
        let rd = statrs::function::gamma::digamma(x);
        special.see((digamma(x).unwrap() - rd).abs() / rd.abs().max(1.0), || format!("digamma({x:.3e})"));
    }

    outcome(
        round.below(1e-10) && cont.below(1e-4) && index.below(1e-12) && special.below(1e-10),
        format!(
            "round trip {} < 1e-10, q→1 {} < 1e-4, GBMM index {} < 1e-12, log_gamma/digamma {} < 1e-10",
            round.show(),
            cont.show(),
            index.show(),
            special.show()
        ),
    )
}

// 2 ------------------------------------------------------------------------

fn mass_1d(dist: &PolicyDistribution, lo: f64, hi: f64) -> f64 {
    let spec = QuadratureSpec { lower: lo, upper: hi, abs_tol: 1e-9, max_subdivisions: 20_000 };
    integrate_adaptive(|x| dist.log_prob(&[x]).map_or(0.0, f64::exp), spec).value
}

fn scalar(rng: &mut Rng) -> LocScaleParams {
    LocScaleParams::scalar(uniform(rng, -2.0, 2.0), uniform(rng, 0.3, 3.0)).unwrap()
}

fn densities() -> Outcome {
    const DRAWS: usize = 50;
    let mut rng = rng(2_000);
    let mut one = Worst::new();
    let inf = f64::INFINITY;
    for i in 0..DRAWS {
        let d = PolicyDistribution::Gaussian(scalar(&mut rng));
        one.see((mass_1d(&d, -inf, inf) - 1.0).abs(), || format!("gaussian, draw {i}"));

        let ls = LocScaleParams::scalar(uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, 0.3, 1.2)).unwrap();
        let d = PolicyDistribution::SquashedGaussian(ls);
        one.see((mass_1d(&d, -1.0, 1.0) - 1.0).abs(), || format!("squashed_gaussian, draw {i}"));

        let nu = uniform(&mut rng, 0.5, 30.0);
        let d = PolicyDistribution::StudentT(StudentTParams::new(scalar(&mut rng), nu).unwrap());
        one.see((mass_1d(&d, -inf, inf) - 1.0).abs(), || format!("student_t, draw {i}"));

        for q in [uniform(&mut rng, -1.0, 0.95), uniform(&mut rng, 1.05, 2.5)] {
            let p = QGaussianParams::new(scalar(&mut rng), q).unwrap();
            let r = p.loc_scale.scale_chol.get(0, 0) * support_radius_sq(q).sqrt();
            let spec = QuadratureSpec::support(p.loc_scale.mu[0], r);
            let d = PolicyDistribution::QGaussian(p);
            one.see((mass_1d(&d, spec.lower, spec.upper) - 1.0).abs(), || format!("q_gaussian q={q:.2}, draw {i}"));
        }

        let (lo, w) = (uniform(&mut rng, -2.0, 0.0), uniform(&mut rng, 0.5, 4.0));
        let p = BetaParams::new(
            vec![uniform(&mut rng, 1.05, 10.0)],
            vec![uniform(&mut rng, 1.05, 10.0)],
            vec![lo],
            vec![lo + w],
        )
        .unwrap();
        let d = PolicyDistribution::Beta(p);
        one.see((mass_1d(&d, lo + 1e-15, lo + w - 1e-15) - 1.0).abs(), || format!("beta, draw {i}"));
    }

    // Proposal tails are product Cauchy, so heavy cases stay lighter than that.
    let mut proposal = common::rng(2_001);
    let ls = random_loc_scale(&mut rng, 2, true);
    let cov = ls.scale_chol.covariance();
    let sigma = vec![cov[0].sqrt(), cov[3].sqrt()];
    let cases = [
        (PolicyDistribution::Gaussian(ls.clone()), ls.mu.clone(), sigma.clone()),
        (PolicyDistribution::StudentT(StudentTParams::new(ls.clone(), 3.0).unwrap()), ls.mu.clone(), sigma.clone()),
        (PolicyDistribution::QGaussian(QGaussianParams::new(ls.clone(), 0.3).unwrap()), ls.mu.clone(), sigma.clone()),
        (PolicyDistribution::QGaussian(QGaussianParams::new(ls.clone(), 1.4).unwrap()), ls.mu.clone(), sigma.clone()),
        (
            PolicyDistribution::Beta(
                BetaParams::new(vec![2.0, 3.5], vec![4.0, 1.5], vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap(),
            ),
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        ),
        (
            PolicyDistribution::SquashedGaussian(LocScaleParams::diagonal(vec![0.2, -0.3], &[0.6, 0.9]).unwrap()),
            vec![0.0, 0.0],
            vec![0.4, 0.4],
        ),
    ];
    let mut two = Worst::new();
    for (d, center, scale) in &cases {
        let (m, _) = importance_normalization(
            |x| d.log_prob(x).unwrap_or(f64::NEG_INFINITY),
            center,
            scale,
            1_000_000,
            &mut proposal,
        );
        two.see((m - 1.0).abs(), String::new);
    }
    outcome(
        one.below(1e-4) && two.below(1e-2),
        format!(
            "1-D |mass-1| {} < 1e-4 over {} draws, 2-D {:.1e} < 1e-2 at 1e6 draws",
            one.show(),
            DRAWS * 6,
            two.value
        ),
    )
}

// 3 ------------------------------------------------------------------------

const FD_FLOOR: f64 = 1e-2;

/// Largest relative error of the μ and L gradients of a location-scale family.
fn loc_scale_error(
    ls: &LocScaleParams,
    a: &[f64],
    step: f64,
    log_prob: impl Fn(&LocScaleParams, &[f64]) -> f64,
    grad: &LocScaleGrad,
) -> f64 {
    let n = ls.dim();
    let fd_mu = finite_diff_gradient(
        |mu| log_prob(&LocScaleParams::new(mu.to_vec(), ls.scale_chol.clone()).unwrap(), a),
        &ls.mu,
        step,
    )
    .unwrap();
    let idx = lower_indices(n);
    let base = ls.scale_chol.as_slice().to_vec();
    let packed: Vec<f64> = idx.iter().map(|&k| base[k]).collect();
    let fd_l = finite_diff_gradient(
        |p| {
            let mut l = base.clone();
            for (&k, v) in idx.iter().zip(p) {
                l[k] = *v;
            }
            log_prob(&with_lower(ls, &l), a)
        },
        &packed,
        step,
    )
    .unwrap();
    let chol = grad.chol(&ls.scale_chol);
    let analytic: Vec<f64> = idx.iter().map(|&k| chol[k]).collect();
    max_relative_error(&grad.mu, &fd_mu, FD_FLOOR).max(max_relative_error(&analytic, &fd_l, FD_FLOOR))
}

/// Counts instances and tracks the worst relative error for one group.
struct Group {
    name: &'static str,
    tol: f64,
    count: usize,
    worst: Worst,
}

impl Group {
    fn new(name: &'static str, tol: f64) -> Self {
        Self { name, tol, count: 0, worst: Worst::new() }
    }

    fn see(&mut self, e: f64) {
        self.count += 1;
        let n = self.count;
        self.worst.see(e, || format!("instance {n}"));
    }

    fn pass(&self) -> bool {
        self.count >= 100 && self.worst.below(self.tol)
    }
}

fn family_gradients(groups: &mut Vec<Group>) {
    let mut rng = rng(3_000);
    let mut g = Group::new("gaussian", 1e-5);
    let mut sq = Group::new("squashed_gaussian", 1e-5);
    let mut t = Group::new("student_t", 1e-5);
    let mut light = Group::new("q_gaussian_light", 1e-5);
    let mut heavy = Group::new("q_gaussian_heavy", 1e-5);
    for n in 1..=3 {
        for _ in 0..100 {
            let ls = random_loc_scale(&mut rng, n, true);
            let a = offset(&ls, &random_offset(&mut rng, n, 2.0));
            let grad = grad_log_prob_gaussian(&ls, &a).unwrap();
            g.see(loc_scale_error(&ls, &a, 1e-5, |p, x| log_prob_gaussian(p, x).unwrap(), &grad));

            let u = offset(&ls, &random_offset(&mut rng, n, 1.5));
            let a: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
            let ParamGrad::LocScale(grad) = PolicyDistribution::SquashedGaussian(ls.clone()).grad_log_prob(&a).unwrap()
            else {
                unreachable!()
            };
            sq.see(loc_scale_error(&ls, &a, 1e-5, |p, x| log_prob_squashed_gaussian(p, x).unwrap(), &grad));

            let nu = uniform(&mut rng, 0.5, 20.0);
            let params = StudentTParams::new(ls.clone(), nu).unwrap();
            let a = offset(&ls, &random_offset(&mut rng, n, 3.0));
            let grad = grad_log_prob_student_t(&params, &a).unwrap();
            let e = loc_scale_error(
                &ls,
                &a,
                1e-5,
                |p, x| log_prob_student_t(&StudentTParams::new(p.clone(), nu).unwrap(), x).unwrap(),
                &grad.loc_scale,
            );
            let fd_nu = finite_diff_gradient(
                |v| log_prob_student_t(&StudentTParams::new(ls.clone(), v[0]).unwrap(), &a).unwrap(),
                &[nu],
                1e-5,
            )
            .unwrap()[0];
            t.see(e.max((grad.nu - fd_nu).abs() / grad.nu.abs().max(FD_FLOOR)));

            for q in [0.0, 0.5, 1.5, 2.0] {
                // A heavy index needs 1/(q-1) > N/2 to be normalizable.
                if q > 1.0 && 1.0 / (q - 1.0) <= 0.5 * n as f64 {
                    continue;
                }
                let params = QGaussianParams::new(ls.clone(), q).unwrap();
                let z: Vec<f64> = if q < 1.0 {
                    let u = sample_uniform_sphere(n, &mut rng).u;
                    let r = 0.9 * support_radius_sq(q).sqrt() * rng.uniform().sqrt();
                    u.iter().map(|v| r * v).collect()
                } else {
                    random_offset(&mut rng, n, 3.0)
                };
                let a = offset(&ls, &z);
                let grad = grad_log_prob_q_gaussian(&params, &a).unwrap();
                let e = loc_scale_error(
                    &ls,
                    &a,
                    if q < 1.0 { 1e-6 } else { 1e-5 },
                    |p, x| log_prob_q_gaussian(&QGaussianParams::new(p.clone(), q).unwrap(), x).unwrap(),
                    &grad,
                );
                if q < 1.0 { light.see(e) } else { heavy.see(e) }
            }
        }
    }
    groups.extend([g, sq, t, light, heavy]);

    let mut beta = Group::new("beta", 1e-5);
    for n in 1..=2 {
        for _ in 0..100 {
            let alpha: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 1.1, 8.0)).collect();
            let bet: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 1.1, 8.0)).collect();
            let low: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -3.0, 0.0)).collect();
            let high: Vec<f64> = low.iter().map(|l| l + uniform(&mut rng, 0.5, 4.0)).collect();
            let a: Vec<f64> = (0..n).map(|i| low[i] + (high[i] - low[i]) * uniform(&mut rng, 0.05, 0.95)).collect();
            let p = BetaParams::new(alpha.clone(), bet.clone(), low.clone(), high.clone()).unwrap();
            let grad = grad_log_prob_beta(&p, &a).unwrap();
            let lp = |al: &[f64], be: &[f64]| {
                log_prob_beta(&BetaParams::new(al.to_vec(), be.to_vec(), low.clone(), high.clone()).unwrap(), &a)
                    .unwrap()
            };
            let fd_a = finite_diff_gradient(|x| lp(x, &bet), &alpha, 1e-5).unwrap();
            let fd_b = finite_diff_gradient(|x| lp(&alpha, x), &bet, 1e-5).unwrap();
            beta.see(max_relative_error(&grad.alpha, &fd_a, FD_FLOOR).max(max_relative_error(&grad.beta, &fd_b, FD_FLOOR)));
        }
    }
    groups.push(beta);
}

/// Draw comfortably inside a light support so central differences stay in it.
fn interior_sample(out: &PolicyHeadOutput, rng: &mut Rng) -> Vec<f64> {
    loop {
        let a = out.dist.sample(rng);
        if let PolicyDistribution::QGaussian(p) = &out.dist {
            if p.q.is_light_tailed() {
                let r: Vec<f64> = a.iter().zip(&p.loc_scale.mu).map(|(x, m)| x - m).collect();
                if p.loc_scale.scale_chol.mahalanobis(&r).0 > 0.8 * support_radius_sq(p.q) {
                    continue;
                }
            }
        }
        return a;
    }
}

fn head_gradients(groups: &mut Vec<Group>) {
    let mut rng = rng(3_100);
    let mut g = Group::new("policy_heads", 1e-5);
    for n in 1..=3 {
        let (lo, hi) = (vec![-2.0; n], vec![1.0; n]);
        let mut configs: Vec<PolicyHeadConfig> =
            Family::ALL.into_iter().map(|f| PolicyHeadConfig::new(f, lo.clone(), hi.clone()).unwrap()).collect();
        configs.push(PolicyHeadConfig::new(Family::QGaussian, lo, hi).unwrap().with_q(1.5).unwrap());
        for c in configs {
            for _ in 0..100 {
                let raw: Vec<f64> = (0..c.raw_dim()).map(|_| uniform(&mut rng, -1.5, 1.5)).collect();
                let out = head_forward(&c, &raw).unwrap();
                let a = interior_sample(&out, &mut rng);
                let grad = head_backward(&c, &out, &out.dist.grad_log_prob(&a).unwrap()).unwrap();
                let fd = finite_diff_gradient(|r| head_forward(&c, r).unwrap().dist.log_prob(&a).unwrap(), &raw, 1e-6)
                    .unwrap();
                g.see(max_relative_error(&grad, &fd, FD_FLOOR));
            }
        }
    }
    groups.push(g);
}

fn mlp_gradients(groups: &mut Vec<Group>) {
    let mut rng = rng(3_200);
    let mut g = Group::new("mlp_backprop", 1e-6);
    for _ in 0..100 {
        let net = MlpParams::init(&[2, 8, 8, 2], &mut rng).unwrap();
        let x = [uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)];
        let gy = [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
        let (_, tape) = net.forward(&x).unwrap();
        let (gp, gx) = net.backward(&tape, &gy).unwrap();
        let objective = |n: &MlpParams, input: &[f64]| {
            let y = n.predict(input).unwrap();
            y[0] * gy[0] + y[1] * gy[1]
        };
        let sizes = net.sizes().to_vec();
        let fd = finite_diff_gradient(
            |p| objective(&MlpParams::from_parts(&sizes, p.to_vec()).unwrap(), &x),
            net.as_slice(),
            1e-6,
        )
        .unwrap();
        let fdx = finite_diff_gradient(|input| objective(&net, input), &x, 1e-6).unwrap();
        g.see(max_relative_error(&gp, &fd, 1e-3).max(max_relative_error(&gx, &fdx, 1e-3)));
    }
    groups.push(g);
}

type LossFn = fn(
    &[TransitionRef<'_>],
    &MlpParams,
    &PolicyHeadConfig,
    &MlpParams,
    &MlpParams,
    &AgentConfig,
    &mut Rng,
) -> qexp::Result<qexp::agents::ActorLoss>;

fn actor_loss_gradients(groups: &mut Vec<Group>) {
    let losses: [(&'static str, Option<LossFn>, f64); 5] = [
        ("awac_loss", Some(awac_loss), 1.0),
        ("tawac_loss_q'=0", Some(tawac_loss), 0.0),
        ("tawac_loss_q'=2", Some(tawac_loss), 2.0),
        ("inac_loss", Some(inac_loss), 1.0),
        ("td3bc_loss", None, 0.0),
    ];
    for (k, (name, loss, q_prime)) in losses.into_iter().enumerate() {
        let mut config = AgentConfig::offline(Algorithm::Tawac);
        config.q_prime = q_prime;
        config.tau = 0.7;
        config.max_weight = 100.0;
        let mut g = Group::new(name, 1e-5);
        for h in heads() {
            for case in 0..100 {
                let mut r = rng(3_300 + 1000 * k as u64 + case);
                let actor = MlpParams::init(&[2, 6, h.raw_dim()], &mut r).unwrap();
                let critic = MlpParams::init(&[3, 6, 1], &mut r).unwrap();
                let value = MlpParams::init(&[2, 6, 1], &mut r).unwrap();
                let ts = fixture(&actor, &h, &mut r);
                let batch = refs(&ts);
                let eval = |a: &MlpParams, r: &mut Rng| match loss {
                    Some(f) => f(&batch, a, &h, &critic, &value, &config, r).unwrap(),
                    None => td3bc_actor_loss(&batch, a, &h, &critic, 1.3).unwrap(),
                };
                let analytic = eval(&actor, &mut r);
                let sizes = actor.sizes().to_vec();
                let fd = finite_diff_gradient(
                    |p| eval(&MlpParams::from_parts(&sizes, p.to_vec()).unwrap(), &mut rng(0)).loss,
                    actor.as_slice(),
                    1e-6,
                )
                .unwrap();
                g.see(max_relative_error(&analytic.grad, &fd, FD_FLOOR));
            }
        }
        groups.push(g);
    }
}

fn gradients() -> Outcome {
    let mut groups = Vec::new();
    family_gradients(&mut groups);
    head_gradients(&mut groups);
    mlp_gradients(&mut groups);
    actor_loss_gradients(&mut groups);
    let failing: Vec<String> = groups
        .iter()
        .filter(|g| !g.pass())
        .map(|g| format!("{} {} over {}", g.name, g.worst.show(), g.count))
        .collect();
    let total: usize = groups.iter().map(|g| g.count).sum();
    let fewest = groups.iter().map(|g| g.count).min().unwrap_or(0);
    let worst = groups.iter().filter(|g| g.tol == 1e-5).map(|g| g.worst.value).fold(0.0, f64::max);
    let mlp = groups.iter().find(|g| g.name == "mlp_backprop").map_or(f64::NAN, |g| g.worst.value);
    let mut detail = format!(
        "{} groups, {total} instances, at least {fewest} each; worst rel err {worst:.1e} < 1e-5, MLP {mlp:.1e} < 1e-6",
        groups.len()
    );
    if !failing.is_empty() {
        detail += &format!("; failing: {}", failing.join(", "));
    }
    outcome(failing.is_empty(), detail)
}

// 4 ------------------------------------------------------------------------

const N_KS: usize = 100_000;

fn draw_1d(n: usize, seed: u64, mut f: impl FnMut(&mut Rng) -> f64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..n).map(|_| f(&mut rng)).collect()
}

/// Unnormalized q-Gaussian density written out from `exp_q` alone.
fn q_kernel(q: f64, mu: f64, s: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        let z = (x - mu) / s;
        exp_q(-0.5 * z * z, q)
    }
}

fn samplers() -> Outcome {
    let mut fits: Vec<(String, FitTestResult)> = Vec::new();
    let mut seed = 4_000;
    let mut next = || {
        seed += 1;
        seed
    };

    let ls = LocScaleParams::scalar(0.6, 0.9).unwrap();
    let x = draw_1d(N_KS, next(), |r| sample_gaussian(&ls, r)[0]);
    fits.push(("gaussian".into(), ks_test_density(&x, |v| (-0.5 * ((v - 0.6) / 0.9).powi(2)).exp()).unwrap()));
    let y = draw_1d(N_KS, next(), |r| sample_squashed_gaussian(&ls, r)[0]);
    let squashed = |a: f64| {
        if a.abs() >= 1.0 {
            return 0.0;
        }
        let u = a.atanh();
        (-0.5 * ((u - 0.6) / 0.9).powi(2)).exp() / (1.0 - a * a)
    };
    fits.push(("squashed_gaussian".into(), ks_test_density(&y, squashed).unwrap()));

    for nu in [1.0, 3.0, 10.0] {
        let p = StudentTParams::new(LocScaleParams::scalar(-0.5, 1.7).unwrap(), nu).unwrap();
        let x = draw_1d(N_KS, next(), |r| sample_student_t(&p, r)[0]);
        let density = move |v: f64| {
            let z = (v + 0.5) / 1.7;
            (1.0 + z * z / nu).powf(-0.5 * (nu + 1.0))
        };
        fits.push((format!("student_t nu={nu}"), ks_test_density(&x, density).unwrap()));
    }

    for q in [-0.5, 0.0, 0.5, 0.9, 1.2, 1.5, 2.0, 2.5] {
        let p = QGaussianParams::new(LocScaleParams::scalar(0.7, 1.3).unwrap(), q).unwrap();
        let x = draw_1d(N_KS, next(), |r| sample_q_gaussian(&p, r)[0]);
        fits.push((format!("q_gaussian q={q}"), ks_test_density(&x, q_kernel(q, 0.7, 1.3)).unwrap()));
        if q < 1.0 {
            let y = draw_1d(N_KS, next(), |r| sample_q_gaussian_gbmm(&p, r).unwrap()[0]);
            fits.push((format!("q_gaussian gbmm q={q}"), ks_test_density(&y, q_kernel(q, 0.7, 1.3)).unwrap()));
        }
    }

    for (al, be) in [(2.0, 2.0), (1.5, 4.0), (6.0, 2.5)] {
        let p = BetaParams::new(vec![al], vec![be], vec![-2.0], vec![1.0]).unwrap();
        let x = draw_1d(N_KS, next(), |r| sample_beta(&p, r)[0]);
        let density = move |v: f64| {
            let u = (v + 2.0) / 3.0;
            if u <= 0.0 || u >= 1.0 {
                0.0
            } else {
                u.powf(al - 1.0) * (1.0 - u).powf(be - 1.0)
            }
        };
        fits.push((format!("beta ({al},{be})"), ks_test_density(&x, density).unwrap()));
    }
    let ks_count = fits.len();

    for q in [0.0, 0.5] {
        let p = QGaussianParams::new(LocScaleParams::scalar(0.0, 1.0).unwrap(), q).unwrap();
        let a = draw_1d(N_KS, next(), |r| sample_stochastic_rep(&p, r).unwrap()[0]);
        let b = draw_1d(N_KS, next(), |r| sample_q_gaussian_gbmm(&p, r).unwrap()[0]);
        fits.push((format!("stochastic rep vs GBMM q={q}"), two_sample_ks(&a, &b).unwrap()));
    }

    let heavy = QGaussianParams::new(LocScaleParams::scalar(0.0, 1.0).unwrap(), 2.0).unwrap();
    let x = draw_1d(1_000_000, next(), |r| sample_q_gaussian(&heavy, r)[0]);
    let chi2 = chi2_test(&x, q_kernel(2.0, 0.0, 1.0), 50, -10.0, 10.0).unwrap();
    fits.push(("chi2 q=2".into(), chi2));

    let mut draws = 0usize;
    let mut outside = 0usize;
    let mut rng = rng(next());
    for n in 1..=3 {
        for q in [-0.5, 0.0, 0.5, 0.9] {
            let ls = random_loc_scale(&mut rng, n, true);
            let p = QGaussianParams::new(ls, q).unwrap();
            for _ in 0..20_000 {
                let x = sample_stochastic_rep(&p, &mut rng).unwrap();
                let y = sample_q_gaussian(&p, &mut rng);
                draws += 2;
                outside += usize::from(!support_contains(&p, &x)) + usize::from(!support_contains(&p, &y));
                if n == 1 {
                    let z = sample_q_gaussian_gbmm(&p, &mut rng).unwrap();
                    draws += 1;
                    outside += usize::from(!support_contains(&p, &z));
                }
            }
        }
    }

    let failing: Vec<String> = fits
        .iter()
        .filter(|(_, f)| !f.pass)
        .map(|(name, f)| format!("{name} {:.2e} ≥ {:.2e}", f.statistic, f.threshold))
        .collect();
    let worst_ratio = fits[..ks_count].iter().map(|(_, f)| f.statistic / f.threshold).fold(0.0, f64::max);
    let mut detail = format!(
        "{ks_count} KS fits at n=1e5, worst D = {worst_ratio:.2} × 1.95/√n; two-sample q∈{{0,0.5}} {}; \
         χ² q=2 {:.1} < {:.1}; {outside}/{draws} light draws outside support",
        if fits[ks_count].1.pass && fits[ks_count + 1].1.pass { "agree" } else { "disagree" },
        chi2.statistic,
        chi2.threshold
    );
    if !failing.is_empty() {
        detail += &format!("; failing: {}", failing.join(", "));
    }
    outcome(failing.is_empty() && outside == 0, detail)
}

// 5 ------------------------------------------------------------------------

fn sparsemax_suite() -> Outcome {
    let mut rng = rng(5_000);
    let mut worst = Worst::new();
    for i in 0..1000 {
        let k = 2 + rng.index(9);
        let values: Vec<f64> = (0..k).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
        let temperature = uniform(&mut rng, 0.1, 3.0);
        let z: Vec<f64> = values.iter().map(|v| v / temperature).collect();
        let p = sparsemax(&SparsemaxInput::new(values, temperature).unwrap());
        let oracle = project_simplex_bruteforce(&z).unwrap();
        let e = p.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst.see(e, || format!("vector {i}, length {k}"));
    }
    outcome(worst.below(1e-9), format!("L∞ {} < 1e-9 over 1000 vectors of length 2–10", worst.show()))
}

// 6 ------------------------------------------------------------------------

fn equivalences() -> Outcome {
    let mut config = AgentConfig::offline(Algorithm::Tawac);
    config.q_prime = 1.0;
    config.tau = 0.4;
    let mut loss = Worst::new();
    let mut batches = 0;
    for h in heads() {
        for case in 0..50 {
            let mut r = rng(6_000 + case);
            let actor = MlpParams::init(&[2, 6, h.raw_dim()], &mut r).unwrap();
            let critic = MlpParams::init(&[3, 6, 1], &mut r).unwrap();
            let value = MlpParams::init(&[2, 6, 1], &mut r).unwrap();
            let ts = fixture(&actor, &h, &mut r);
            let batch = refs(&ts);
            let t = tawac_loss(&batch, &actor, &h, &critic, &value, &config, &mut rng(1)).unwrap();
            let a = awac_loss(&batch, &actor, &h, &critic, &value, &config, &mut rng(1)).unwrap();
            let e = ((t.loss - a.loss).abs() / a.loss.abs().max(1.0)).max(max_relative_error(&t.grad, &a.grad, 1.0));
            loss.see(e, || format!("{} case {case}", h.family));
            batches += 1;
        }
    }

    // The exact gap is (z⁴ - 2z² - 1)/(4ν) + O(ν⁻²), which passes 1e-2 at
    // |z| ≈ 2.75 when ν = 1000. The grid stops at 2.5 and the expansion is
    // checked separately out to 3.
    let nu = 1000.0;
    let mut gauss = Worst::new();
    let mut expansion = Worst::new();
    for (mu, s) in [(0.0, 1.0), (0.5, 0.3), (-1.0, 2.0)] {
        let ls = LocScaleParams::scalar(mu, s).unwrap();
        let t = StudentTParams::new(ls.clone(), nu).unwrap();
        for i in 0..=60 {
            let z = -3.0 + 0.1 * i as f64;
            let a = mu + s * z;
            let d = log_prob_student_t(&t, &[a]).unwrap() - log_prob_gaussian(&ls, &[a]).unwrap();
            if z.abs() <= 2.5 + 1e-9 {
                gauss.see(d.abs(), || format!("μ={mu} σ={s} z={z:.1}"));
            }
            let predicted = (z.powi(4) - 2.0 * z * z - 1.0) / (4.0 * nu);
            if z.abs() <= 3.0 + 1e-9 {
                expansion.see((d - predicted).abs(), || format!("z={z:.1}"));
            }
        }
    }

    let mut heavy = Worst::new();
    for nu in [1.0, 3.0, 10.0] {
        for sigma_t in [0.5, 1.0, 2.0] {
            let t = StudentTParams::new(LocScaleParams::scalar(0.3, sigma_t).unwrap(), nu).unwrap();
            let q = 1.0 + 2.0 / (nu + 1.0);
            let s = sigma_t * (nu / (nu + 1.0)).sqrt();
            let g = QGaussianParams::new(LocScaleParams::scalar(0.3, s).unwrap(), q).unwrap();
            for i in 0..=80 {
                let a = -10.0 + 0.25 * i as f64;
                let d = log_prob_student_t(&t, &[a]).unwrap().exp() - log_prob_q_gaussian(&g, &[a]).unwrap().exp();
                heavy.see(d.abs(), || format!("ν={nu} σ={sigma_t} a={a}"));
            }
        }
    }
    outcome(
        loss.below(1e-10) && gauss.below(1e-2) && expansion.below(5e-4) && heavy.below(1e-8),
        format!(
            "TAWAC(q'=1) vs AWAC {} < 1e-10 on {batches} batches; t(ν=1000) vs Gaussian log-prob {} < 1e-2 for |z| ≤ 2.5, \
             gap within {} < 5e-4 of its 1/ν expansion for |z| ≤ 3; t vs q-Gaussian density {} < 1e-8",
            loss.show(),
            gauss.show(),
            expansion.show(),
            heavy.show()
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn critic_error(critics: &Critics, data: &ReplayBuffer, values: &[f64]) -> f64 {
    data.iter()
        .zip(values)
        .map(|(t, v)| (critics.nets[0].params.predict(&[t.state, t.action].concat()).unwrap()[0] - v).abs())
        .fold(0.0, f64::max)
}

fn td_chain() -> Outcome {
    const LIMIT: usize = 10_000;
    let (data, values) = chain(3);
    let mut r = rng(7_000);
    let p = MlpParams::init(&[4, 32, 32, 1], &mut r).unwrap();
    let mut critics = Critics { targets: vec![p.clone()], nets: vec![Net::new(p, AdamConfig::new(1e-3, 0.9, 0.999))] };
    let batch: Vec<TransitionRef<'_>> = data.iter().collect();
    let mut updates = 0;
    let mut err = critic_error(&critics, &data, &values);
    while err > 1e-2 && updates < LIMIT {
        let y: Vec<f64> = batch
            .iter()
            .map(|t| t.reward + if t.terminated { 0.0 } else { 0.99 * critics.target_q(t.next_state, &[0.0]).unwrap() })
            .collect();
        critic_td_step(&mut critics, &batch, &y, Some(0.1)).unwrap();
        updates += 1;
        err = critic_error(&critics, &data, &values);
    }
    outcome(
        err <= 1e-2 && updates < LIMIT,
        format!("max |Q - V*| = {err:.1e} ≤ 1e-2 after {updates} updates < {LIMIT}; V* = {values:.4?}"),
    )
}

// 8 ------------------------------------------------------------------------

const ONLINE_STEPS: u64 = 300_000;

fn online_config(env: &str, agent: &str, family: &str, extra: &str) -> ExperimentConfig {
    let text = format!(
        "env = \"{env}\"\nagent = \"{agent}\"\ntotal_steps = {ONLINE_STEPS}\nprotocol = \"best\"\n\
         [policy]\nfamily = \"{family}\"\nq = 0.0\n[hyperparameters]\n{extra}"
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Seeds reaching the goal out of ten; a seed stops at its first success.
fn mountain_car(cfg: &ExperimentConfig) -> (usize, Vec<String>, f64) {
    let mut reached = 0;
    let mut per_seed = Vec::new();
    let mut longest = 0.0f64;
    for seed in 0..10 {
        let start = Instant::now();
        let run = train_run(cfg, seed, None, |r| r.ret <= -1000.0).unwrap();
        longest = longest.max(start.elapsed().as_secs_f64());
        let last = run.records.last().unwrap();
        if last.ret > -1000.0 {
            reached += 1;
            per_seed.push(format!("{}k", last.step / 1000));
        } else {
            per_seed.push("-".into());
        }
    }
    (reached, per_seed, longest)
}

fn online_learning() -> Outcome {
    const PER_RUN: f64 = 7200.0;
    let candidates = [
        ("student_t + tawac", online_config("mountain_car_cost", "tawac", "student_t", "tau = 0.1\nq_prime = 0.0\n")),
        ("q_gaussian(q=0) + tawac", online_config("mountain_car_cost", "tawac", "q_gaussian", "tau = 0.1\nq_prime = 0.0\n")),
        ("q_gaussian(q=0) + greedyac", online_config("mountain_car_cost", "greedyac", "q_gaussian", "tau = 0.01\n")),
    ];
    let mut a_pass = false;
    let mut a_detail = Vec::new();
    let mut slowest = 0.0f64;
    for (name, cfg) in &candidates {
        let (reached, per_seed, longest) = mountain_car(cfg);
        slowest = slowest.max(longest);
        a_detail.push(format!("{name} {reached}/10 [{}]", per_seed.join(" ")));
        if reached >= 7 {
            a_pass = true;
            break;
        }
    }

    let cfg = online_config("pendulum", "tawac", "q_gaussian", "tau = 0.1\nq_prime = 0.0\n");
    let mut gains = Vec::new();
    for seed in 0..3 {
        let start = Instant::now();
        let run = train_run(&cfg, seed, None, |_| true).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let rets: Vec<f64> = run.records.iter().map(|r| r.ret).collect();
        gains.push(mean(&rets[rets.len() - 10..]) - mean(&rets[..10]));
    }
    let gain = mean(&gains);
    let b_pass = gain >= 200.0;
    outcome(
        a_pass && b_pass && slowest <= PER_RUN,
        format!(
            "(a) mountain car goal within {}k steps: {} (need 7/10); (b) pendulum tawac(q'=0) light q-Gaussian \
             final-10 minus first-10 eval mean {gain:.0} ≥ 200 (seeds {:.0?}); slowest run {slowest:.0} s ≤ {PER_RUN:.0} s",
            ONLINE_STEPS / 1000,
            a_detail.join("; "),
            gains
        ),
    )
}

// 9 ------------------------------------------------------------------------

const BEHAVIOR_STEPS: u64 = 20_000;
const DATASET: usize = 100_000;
const OFFLINE_UPDATES: u64 = 30_000;

fn offline_pipeline() -> Outcome {
    let text = format!(
        "env = \"pendulum\"\nagent = \"tawac\"\ntotal_steps = {BEHAVIOR_STEPS}\neval_interval = {BEHAVIOR_STEPS}\n\
         [policy]\nfamily = \"q_gaussian\"\nq = 0.0\n[hyperparameters]\ntau = 0.1\nq_prime = 0.0\n"
    );
    let behavior = train_run(&ExperimentConfig::from_toml(&text).unwrap(), 0, None, |_| true).unwrap();
    let data = behavior_dataset(EnvKind::Pendulum, Some(&behavior.agent), DATASET, 1).unwrap();
    let episodes = DATASET as f64 / qexp::envs::MAX_EPISODE_STEPS as f64;
    let behavior_avg = data.transitions.iter().map(|t| t.reward).sum::<f64>() / episodes;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pendulum.bin");
    data.write(std::io::BufWriter::new(std::fs::File::create(&path).unwrap())).unwrap();

    let mut pass = true;
    let mut parts = Vec::new();
    for (agent, extra) in [("tawac", "q_prime = 0.0\n"), ("awac", "")] {
        let text = format!(
            "env = \"pendulum\"\nagent = \"{agent}\"\ndataset = {path:?}\ntotal_steps = {OFFLINE_UPDATES}\n\
             eval_interval = {OFFLINE_UPDATES}\neval_episodes = 5\n\
             [policy]\nfamily = \"q_gaussian\"\nq = 0.0\n\
             [hyperparameters]\nhidden = [64, 64]\nbatch_size = 64\n{extra}"
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let buffer = load_dataset(&cfg).unwrap();
        let rets: Vec<f64> = (0..10)
            .map(|seed| train_run(&cfg, seed, buffer.as_ref(), |_| true).unwrap().records.last().unwrap().ret)
            .collect();
        let ok = rets.iter().filter(|r| **r >= behavior_avg - 50.0).count();
        pass &= ok >= 7;
        parts.push(format!("{agent} {ok}/10 (returns {rets:.0?})"));
    }
    outcome(
        pass,
        format!(
            "behavior after {}k steps averages {behavior_avg:.0} over {episodes:.0} episodes; \
             offline at or above {:.0}: {} (need 7/10 each)",
            BEHAVIOR_STEPS / 1000,
            behavior_avg - 50.0,
            parts.join(", ")
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn without_seconds(path: &std::path::Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn reproducibility() -> Outcome {
    let configs = [
        "env = \"pendulum\"\nagent = \"tawac\"\ntotal_steps = 2000\neval_interval = 500\nseeds = [3]\n\
         [policy]\nfamily = \"q_gaussian\"\nq = 0.0\n[hyperparameters]\nhidden = [32, 32]\nbatch_size = 32\n",
        "env = \"mountain_car_cost\"\nagent = \"sac\"\ntotal_steps = 2000\neval_interval = 500\nseeds = [3]\n\
         eval_policy = \"sample\"\n[policy]\nfamily = \"student_t\"\n[hyperparameters]\nhidden = [32, 32]\nbatch_size = 32\n",
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut rows = 0;
    for (i, text) in configs.iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let mut csvs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("c{i}-run{run}"));
            let run = Command::new(env!("CARGO_BIN_EXE_qexp"))
                .args(["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .output()
                .unwrap();
            assert!(run.status.success(), "qexp train: {}", String::from_utf8_lossy(&run.stderr));
            csvs.push(without_seconds(&out.join("seed-3/eval.csv")));
        }
        rows += csvs[0].lines().count() - 1;
        identical += usize::from(csvs[0] == csvs[1]);
    }
    outcome(
        identical == configs.len(),
        format!("{identical}/{} configs gave identical eval.csv across two `qexp train` runs ({rows} rows)", configs.len()),
    )
}
