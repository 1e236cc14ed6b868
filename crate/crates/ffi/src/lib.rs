//! C ABI over the `qexp` toolkit.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns a [`QexpStatus`];
//! on failure a message is kept per thread and can be read with
//! [`qexp_last_error`]. Panics never cross the boundary: they are reported
//! as [`QexpStatus::Panic`].
//!
//! Array arguments are `(pointer, length)` pairs or have the length implied
//! by a handle (`qexp_distribution_dim`, `qexp_env_obs_dim`, ...). Output
//! arrays must hold at least that many doubles.

use qexp::agents::Agent;
use qexp::distributions::{
    sparsemax, BetaParams, LocScaleParams, PolicyDistribution, QGaussianParams, SparsemaxInput, StudentTParams,
};
use qexp::envs::{EnvKind, EnvState};
use qexp::harness::{load_agent, ExperimentConfig};
use qexp::{Error, Rng, StreamPurpose};
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QexpStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    DimensionMismatch = 3,
    UndefinedGradient = 4,
    InsufficientData = 5,
    Config = 6,
    Format = 7,
    Io = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> QexpStatus {
    match e {
        Error::Domain(_) => QexpStatus::Domain,
        Error::DimensionMismatch { .. } => QexpStatus::DimensionMismatch,
        Error::UndefinedGradient(_) => QexpStatus::UndefinedGradient,
        Error::InsufficientData { .. } | Error::MissingBehaviorLogProb(_) => QexpStatus::InsufficientData,
        Error::Config(_) => QexpStatus::Config,
        Error::Format(_) | Error::Csv(_) => QexpStatus::Format,
        Error::Io(_) => QexpStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QexpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QexpStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QexpStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QexpStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Lib(Error::Config(format!("{what} is not valid UTF-8"))))
}

/// Message of the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qexp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Deformed exponential `exp_q(x)`; `+inf` or `0` where the base leaves the
/// domain.
#[no_mangle]
pub extern "C" fn qexp_exp_q(x: f64, q: f64) -> f64 {
    qexp::exp_q(x, q)
}

/// Deformed logarithm `ln_q(x)` for `x > 0`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qexp_ln_q(x: f64, q: f64, out: *mut f64) -> QexpStatus {
    guard(|| write_out(out, qexp::ln_q(x, q)?, "out"))
}

/// Euclidean projection of `values / temperature` onto the simplex.
///
/// # Safety
/// `values` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qexp_sparsemax(values: *const f64, n: usize, temperature: f64, out: *mut f64) -> QexpStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        let p = sparsemax(&SparsemaxInput::new(v.to_vec(), temperature)?);
        slice_mut(out, n, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Seeded random stream. `purpose` separates independent streams drawn
/// from the same seed.
pub struct QexpRng(Rng);

#[no_mangle]
pub extern "C" fn qexp_rng_new(seed: u64, purpose: u32) -> *mut QexpRng {
    Box::into_raw(Box::new(QexpRng(Rng::stream(0, seed, StreamPurpose::Other(purpose)))))
}

/// # Safety
/// `rng` must come from [`qexp_rng_new`] and not be used afterwards; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn qexp_rng_free(rng: *mut QexpRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Uniform draw on `[0, 1)`.
///
/// # Safety
/// `rng` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qexp_rng_uniform(rng: *mut QexpRng, out: *mut f64) -> QexpStatus {
    guard(|| {
        let r = handle_mut(rng, "rng")?;
        write_out(out, r.0.uniform(), "out")
    })
}

/// A policy distribution with fixed parameters.
pub struct QexpDistribution(PolicyDistribution);

unsafe fn loc_scale(dim: usize, mu: *const f64, sigma: *const f64) -> Result<LocScaleParams, Fail> {
    if dim == 0 {
        return Err(Fail::Lib(Error::Domain("dimension must be positive".into())));
    }
    Ok(LocScaleParams::diagonal(slice(mu, dim, "mu")?.to_vec(), slice(sigma, dim, "sigma")?)?)
}

unsafe fn new_distribution(
    out: *mut *mut QexpDistribution,
    make: impl FnOnce() -> Result<PolicyDistribution, Fail>,
) -> QexpStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let d = make()?;
        out.write(Box::into_raw(Box::new(QexpDistribution(d))));
        Ok(())
    })
}

/// Diagonal Gaussian with location `mu` and standard deviations `sigma`.
///
/// # Safety
/// `mu` and `sigma` must hold `dim` doubles; `out` must be valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn qexp_gaussian_new(
    dim: usize,
    mu: *const f64,
    sigma: *const f64,
    out: *mut *mut QexpDistribution,
) -> QexpStatus {
    new_distribution(out, || Ok(PolicyDistribution::Gaussian(loc_scale(dim, mu, sigma)?)))
}

/// `tanh` of a diagonal Gaussian.
///
/// # Safety
/// As [`qexp_gaussian_new`].
#[no_mangle]
pub unsafe extern "C" fn qexp_squashed_gaussian_new(
    dim: usize,
    mu: *const f64,
    sigma: *const f64,
    out: *mut *mut QexpDistribution,
) -> QexpStatus {
    new_distribution(out, || Ok(PolicyDistribution::SquashedGaussian(loc_scale(dim, mu, sigma)?)))
}

/// Diagonal-scale multivariate Student's t with `nu` degrees of freedom.
///
/// # Safety
/// As [`qexp_gaussian_new`].
#[no_mangle]
pub unsafe extern "C" fn qexp_student_t_new(
    dim: usize,
    mu: *const f64,
    sigma: *const f64,
    nu: f64,
    out: *mut *mut QexpDistribution,
) -> QexpStatus {
    new_distribution(out, || Ok(PolicyDistribution::StudentT(StudentTParams::new(loc_scale(dim, mu, sigma)?, nu)?)))
}

/// Diagonal-scale q-Gaussian, `q < 3`; bounded support for `q < 1`.
///
/// # Safety
/// As [`qexp_gaussian_new`].
#[no_mangle]
pub unsafe extern "C" fn qexp_q_gaussian_new(
    dim: usize,
    mu: *const f64,
    sigma: *const f64,
    q: f64,
    out: *mut *mut QexpDistribution,
) -> QexpStatus {
    new_distribution(out, || Ok(PolicyDistribution::QGaussian(QGaussianParams::new(loc_scale(dim, mu, sigma)?, q)?)))
}

/// Independent Beta(`alpha`, `beta`) coordinates rescaled to `[low, high]`.
///
/// # Safety
/// All four arrays must hold `dim` doubles; `out` must be valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn qexp_beta_new(
    dim: usize,
    alpha: *const f64,
    beta: *const f64,
    low: *const f64,
    high: *const f64,
    out: *mut *mut QexpDistribution,
) -> QexpStatus {
    new_distribution(out, || {
        Ok(PolicyDistribution::Beta(BetaParams::new(
            slice(alpha, dim, "alpha")?.to_vec(),
            slice(beta, dim, "beta")?.to_vec(),
            slice(low, dim, "low")?.to_vec(),
            slice(high, dim, "high")?.to_vec(),
        )?))
    })
}

/// # Safety
/// `d` must come from a `*_new` constructor and not be used afterwards;
/// null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qexp_distribution_free(d: *mut QexpDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Action dimension, or 0 for a null handle.
///
/// # Safety
/// `d` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qexp_distribution_dim(d: *const QexpDistribution) -> usize {
    d.as_ref().map_or(0, |d| d.0.dim())
}

/// Log-density at `action`; `-inf` outside a bounded support.
///
/// # Safety
/// `action` must hold `dim` doubles and `out` be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qexp_distribution_log_prob(
    d: *const QexpDistribution,
    action: *const f64,
    out: *mut f64,
) -> QexpStatus {
    guard(|| {
        let d = handle(d, "distribution")?;
        let a = slice(action, d.0.dim(), "action")?;
        let lp = if d.0.in_support(a) { d.0.log_prob(a)? } else { f64::NEG_INFINITY };
        write_out(out, lp, "out")
    })
}

/// One exact draw written to `out`.
///
/// # Safety
/// `out` must hold `dim` doubles; both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn qexp_distribution_sample(
    d: *const QexpDistribution,
    rng: *mut QexpRng,
    out: *mut f64,
) -> QexpStatus {
    guard(|| {
        let d = handle(d, "distribution")?;
        let r = handle_mut(rng, "rng")?;
        let x = d.0.sample(&mut r.0);
        slice_mut(out, x.len(), "out")?.copy_from_slice(&x);
        Ok(())
    })
}

/// 1 when `action` has positive density, 0 otherwise (or on bad input).
///
/// # Safety
/// `action` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn qexp_distribution_in_support(d: *const QexpDistribution, action: *const f64) -> c_int {
    let Some(d) = d.as_ref() else { return 0 };
    match slice(action, d.0.dim(), "action") {
        Ok(a) => c_int::from(d.0.in_support(a)),
        Err(_) => 0,
    }
}

/// One classic-control episode in progress.
pub struct QexpEnv {
    kind: EnvKind,
    state: EnvState,
}

/// Environment by name (`mountain_car_cost`, `pendulum`,
/// `acrobot_continuous`), already reset from `rng`.
///
/// # Safety
/// `name` must be a NUL-terminated string, `rng` a live handle and `out`
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qexp_env_new(name: *const c_char, rng: *mut QexpRng, out: *mut *mut QexpEnv) -> QexpStatus {
    guard(|| {
        let kind: EnvKind = string(name, "name")?.parse()?;
        let r = handle_mut(rng, "rng")?;
        let env = QexpEnv { kind, state: kind.reset(&mut r.0) };
        write_out(out, Box::into_raw(Box::new(env)), "out")
    })
}

/// # Safety
/// `env` must come from [`qexp_env_new`] and not be used afterwards; null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn qexp_env_free(env: *mut QexpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle or null (giving 0).
#[no_mangle]
pub unsafe extern "C" fn qexp_env_obs_dim(env: *const QexpEnv) -> usize {
    env.as_ref().map_or(0, |e| e.kind.obs_dim())
}

/// # Safety
/// `env` must be a live handle or null (giving 0).
#[no_mangle]
pub unsafe extern "C" fn qexp_env_action_dim(env: *const QexpEnv) -> usize {
    env.as_ref().map_or(0, |e| e.kind.action_dim())
}

/// Current observation.
///
/// # Safety
/// `obs` must hold `obs_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn qexp_env_observe(env: *const QexpEnv, obs: *mut f64) -> QexpStatus {
    guard(|| {
        let e = handle(env, "env")?;
        slice_mut(obs, e.kind.obs_dim(), "obs")?.copy_from_slice(&e.state.observation());
        Ok(())
    })
}

/// Starts a new episode.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn qexp_env_reset(env: *mut QexpEnv, rng: *mut QexpRng) -> QexpStatus {
    guard(|| {
        let e = handle_mut(env, "env")?;
        let r = handle_mut(rng, "rng")?;
        e.state = e.kind.reset(&mut r.0);
        Ok(())
    })
}

/// Applies `action` (clipped to the bounds). Writes the next observation,
/// reward and the two end-of-episode flags (0 or 1).
///
/// # Safety
/// `action` must hold `action_dim` doubles, `obs` `obs_dim` doubles, and the
/// scalar outputs must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn qexp_env_step(
    env: *mut QexpEnv,
    action: *const f64,
    obs: *mut f64,
    reward: *mut f64,
    terminated: *mut c_int,
    truncated: *mut c_int,
) -> QexpStatus {
    guard(|| {
        let e = handle_mut(env, "env")?;
        let a = slice(action, e.kind.action_dim(), "action")?;
        if a.iter().any(|x| x.is_nan()) {
            return Err(Error::Domain("action is NaN".into()).into());
        }
        let o = slice_mut(obs, e.kind.obs_dim(), "obs")?;
        if reward.is_null() || terminated.is_null() || truncated.is_null() {
            return Err(Fail::Null("reward/terminated/truncated"));
        }
        let r = e.state.step(a);
        o.copy_from_slice(&r.next_state);
        reward.write(r.reward);
        terminated.write(c_int::from(r.terminated));
        truncated.write(c_int::from(r.truncated));
        Ok(())
    })
}

/// A trained agent restored from a run directory.
pub struct QexpAgent(Agent);

/// Loads the agent described by a TOML config with the networks of a
/// `checkpoint.txt` produced by `qexp train`.
///
/// # Safety
/// Both paths must be NUL-terminated strings and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn qexp_agent_load(
    config_path: *const c_char,
    checkpoint_path: *const c_char,
    out: *mut *mut QexpAgent,
) -> QexpStatus {
    guard(|| {
        let text = std::fs::read_to_string(string(config_path, "config_path")?).map_err(Error::from)?;
        let cfg = ExperimentConfig::from_toml(&text)?;
        let agent = load_agent(&cfg, Path::new(string(checkpoint_path, "checkpoint_path")?))?;
        write_out(out, Box::into_raw(Box::new(QexpAgent(agent))), "out")
    })
}

/// # Safety
/// `agent` must come from [`qexp_agent_load`] and not be used afterwards;
/// null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qexp_agent_free(agent: *mut QexpAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// # Safety
/// `agent` must be a live handle or null (giving 0).
#[no_mangle]
pub unsafe extern "C" fn qexp_agent_obs_dim(agent: *const QexpAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.0.obs_dim())
}

/// # Safety
/// `agent` must be a live handle or null (giving 0).
#[no_mangle]
pub unsafe extern "C" fn qexp_agent_action_dim(agent: *const QexpAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.0.action_dim())
}

/// Deterministic action for an observation. With a non-null `rng` the
/// action is sampled from the policy instead.
///
/// # Safety
/// `obs` must hold `obs_dim` doubles and `action` `action_dim` doubles;
/// `rng` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn qexp_agent_act(
    agent: *const QexpAgent,
    obs: *const f64,
    rng: *mut QexpRng,
    action: *mut f64,
) -> QexpStatus {
    guard(|| {
        let a = handle(agent, "agent")?;
        let o = slice(obs, a.0.obs_dim(), "obs")?;
        let act = match rng.as_mut() {
            Some(r) => a.0.act(o, &mut r.0)?,
            None => a.0.act_greedy(o)?,
        };
        slice_mut(action, act.len(), "action")?.copy_from_slice(&act);
        Ok(())
    })
}
