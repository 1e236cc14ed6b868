use super::quadrature::integrate;
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitTestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub sample_size: usize,
    pub pass: bool,
}

impl FitTestResult {
    fn new(statistic: f64, threshold: f64, sample_size: usize) -> Self {
        Self { statistic, threshold, sample_size, pass: statistic < threshold }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_SAMPLES, have: n });
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("NaN sample"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// One-sample KS threshold used throughout, roughly α = 0.001.
pub fn ks_threshold(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

/// Kolmogorov-Smirnov distance between sorted samples and CDF values at
/// those samples.
pub fn ks_statistic(sorted_samples_cdf: &[f64]) -> f64 {
    let n = sorted_samples_cdf.len() as f64;
    sorted_samples_cdf
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).max((i + 1) as f64 / n - f))
        .fold(0.0, f64::max)
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<FitTestResult> {
    check_size(samples.len())?;
    let s = sorted(samples)?;
    let values: Vec<f64> = s.iter().map(|&x| cdf(x)).collect();
    Ok(FitTestResult::new(ks_statistic(&values), ks_threshold(s.len()), s.len()))
}

/// CDF of `density` at each point of an ascending slice, integrating piecewise
/// between neighbours so the total cost stays linear in the number of points.
/// Returns `(cdf_values, total_mass)`.
pub fn cdf_at_sorted(density: impl Fn(f64) -> f64, points: &[f64], tol: f64) -> (Vec<f64>, f64) {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for &x in points {
        if x > prev {
            acc += integrate(&density, prev, x, tol).value;
            prev = x;
        }
        out.push(acc);
    }
    let total = acc + integrate(&density, prev, f64::INFINITY, tol).value;
    (out, total)
}

/// KS test against the CDF obtained by integrating `density` numerically.
/// The numerical CDF is divided by its total mass, so unnormalized kernels
/// are accepted.
pub fn ks_test_density(samples: &[f64], density: impl Fn(f64) -> f64) -> Result<FitTestResult> {
    check_size(samples.len())?;
    let s = sorted(samples)?;
    let n = s.len();
    let (mut cdf, total) = cdf_at_sorted(density, &s, 1e-12);
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::domain("density does not integrate to a positive mass"));
    }
    cdf.iter_mut().for_each(|c| *c /= total);
    Ok(FitTestResult::new(ks_statistic(&cdf), ks_threshold(n), n))
}

/// Two-sample KS test with threshold `1.95·√((n+m)/(n·m))`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<FitTestResult> {
    check_size(a.len().min(b.len()))?;
    let (x, y) = (sorted(a)?, sorted(b)?);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(FitTestResult::new(d, 1.95 * ((nf + mf) / (nf * mf)).sqrt(), n + m))
}

/// Regularized lower incomplete gamma `P(a, x)`.
fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_front = a * x.ln() - x - crate::special::log_gamma(a).expect("a > 0");
    if x < a + 1.0 {
        let (mut term, mut sum, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * ln_front.exp()
    } else {
        // Lentz continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - ln_front.exp() * h
    }
}

/// Upper 0.001 quantile of χ² with `df` degrees of freedom.
pub fn chi2_critical_001(df: usize) -> f64 {
    assert!(df > 0, "degrees of freedom must be positive");
    let a = df as f64 / 2.0;
    let (mut lo, mut hi) = (0.0, df as f64 + 100.0 * (df as f64).sqrt() + 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_p(a, mid / 2.0) < 0.999 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pearson χ² test of samples against `density` using `bins` equal-width
/// bins on `[lower, upper]`. Samples beyond the range fall into the outer
/// bins, whose expected mass includes the tails. Passes when the statistic is
/// below the 0.001 critical value.
pub fn chi2_test(
    samples: &[f64],
    density: impl Fn(f64) -> f64,
    bins: usize,
    lower: f64,
    upper: f64,
) -> Result<FitTestResult> {
    check_size(samples.len())?;
    if bins < 2 || !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
        return Err(Error::domain("chi2_test needs at least two bins on a finite range"));
    }
    let width = (upper - lower) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if x.is_nan() {
            return Err(Error::domain("NaN sample"));
        }
        let idx = ((x - lower) / width).floor();
        let idx = idx.clamp(0.0, (bins - 1) as f64) as usize;
        counts[idx] += 1;
    }
    let mut probs: Vec<f64> = (0..bins)
        .map(|b| {
            let lo = if b == 0 { f64::NEG_INFINITY } else { lower + b as f64 * width };
            let hi = if b + 1 == bins { f64::INFINITY } else { lower + (b + 1) as f64 * width };
            integrate(&density, lo, hi, 1e-13).value
        })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let n = samples.len() as f64;
    let mut stat = 0.0;
    let mut used = 0;
    for (c, p) in counts.iter().zip(&probs) {
        let e = n * p;
        if e > 0.0 {
            stat += (*c as f64 - e).powi(2) / e;
            used += 1;
        } else if *c > 0 {
            stat = f64::INFINITY;
        }
    }
    let df = used.max(2) - 1;
    Ok(FitTestResult::new(stat, chi2_critical_001(df), samples.len()))
}
