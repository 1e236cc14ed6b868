//! Deformed (Tsallis) exponential and logarithm, plus the index map used by
//! the generalized Box-Müller sampler.

use crate::error::{Error, Result};

/// Below this distance from 1 the deformed functions switch to their
/// ordinary `exp`/`ln` limits.
pub const BRANCH_TOLERANCE: f64 = 1e-12;

/// The entropic index `q` that deforms `exp` and `ln`.
///
/// `q = 1` is the ordinary exponential family, `q < 1` gives bounded support
/// and `1 < q < 3` heavy tails. Validity for a particular density is checked by
/// the parameter types that hold an index, not here.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct EntropicIndex(f64);

impl EntropicIndex {
    pub const GAUSSIAN: EntropicIndex = EntropicIndex(1.0);

    pub const fn new(q: f64) -> Self {
        EntropicIndex(q)
    }

    #[inline]
    pub const fn get(self) -> f64 {
        self.0
    }

    /// True when the index is close enough to 1 to use the undeformed limit.
    #[inline]
    pub fn is_unit(self) -> bool {
        (self.0 - 1.0).abs() < BRANCH_TOLERANCE
    }

    #[inline]
    pub fn is_light_tailed(self) -> bool {
        self.0 < 1.0 && !self.is_unit()
    }

    #[inline]
    pub fn is_heavy_tailed(self) -> bool {
        self.0 > 1.0 && !self.is_unit()
    }
}

impl From<f64> for EntropicIndex {
    fn from(q: f64) -> Self {
        EntropicIndex(q)
    }
}

impl std::fmt::Display for EntropicIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "q={}", self.0)
    }
}

/// `exp_q(x) = [1 + (1-q) x]_+^{1/(1-q)}`, or `exp(x)` at `q = 1`.
///
/// Never negative. On the clipped branch the result is 0 for `q < 1` and
/// `+inf` for `q > 1`; callers must treat an infinite value as out of range.
#[inline]
pub fn exp_q(x: f64, q: impl Into<EntropicIndex>) -> f64 {
    let q = q.into();
    if q.is_unit() {
        return x.exp();
    }
    let one_minus_q = 1.0 - q.get();
    let base = (1.0 + one_minus_q * x).max(0.0);
    base.powf(one_minus_q.recip())
}

/// `ln_q(x) = (x^{1-q} - 1) / (1-q)`, or `ln(x)` at `q = 1`.
pub fn ln_q(x: f64, q: impl Into<EntropicIndex>) -> Result<f64> {
    // `!(x > 0)` also rejects NaN.
    if !(x > 0.0) {
        return Err(Error::domain(format!("ln_q requires x > 0, got {x}")));
    }
    let q = q.into();
    if q.is_unit() {
        return Ok(x.ln());
    }
    let one_minus_q = 1.0 - q.get();
    // x^{1-q} - 1 = expm1((1-q) ln x) keeps precision for x near 1.
    Ok((one_minus_q * x.ln()).exp_m1() / one_minus_q)
}

/// Entropic index of the variates produced by the generalized Box-Müller
/// transform when the generator uses `ln_q` with index `q_generator`:
/// `q' = (3q - 1) / (q + 1)`.
pub fn gbmm_index_map(q_generator: impl Into<EntropicIndex>) -> Result<EntropicIndex> {
    let q = q_generator.into().get();
    if q == -1.0 {
        return Err(Error::domain("gbmm_index_map is undefined at q = -1"));
    }
    Ok(EntropicIndex((3.0 * q - 1.0) / (q + 1.0)))
}

/// Generator index that makes the Box-Müller transform emit `q_target`
/// variates: `q = (q' + 1) / (3 - q')`, the algebraic inverse of
/// [`gbmm_index_map`].
pub fn gbmm_index_inverse(q_target: impl Into<EntropicIndex>) -> Result<EntropicIndex> {
    let qt = q_target.into().get();
    if !(qt < 3.0) {
        return Err(Error::domain(format!(
            "gbmm_index_inverse requires q' < 3, got {qt}"
        )));
    }
    Ok(EntropicIndex((qt + 1.0) / (3.0 - qt)))
}
