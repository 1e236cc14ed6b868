use crate::error::{Error, Result};

/// Scores `values / temperature` to be projected onto the simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsemaxInput {
    pub values: Vec<f64>,
    pub temperature: f64,
}

impl SparsemaxInput {
    pub fn new(values: Vec<f64>, temperature: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sparsemax needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("sparsemax values must be finite"));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!("temperature must be > 0, got {temperature}")));
        }
        Ok(Self { values, temperature })
    }

    fn scores(&self) -> Vec<f64> {
        self.values.iter().map(|v| v / self.temperature).collect()
    }
}

/// Threshold `t` such that `max(z - t, 0)` sums to one, with the size of the
/// active set. Sort-based, `O(K log K)`.
pub fn sparsemax_threshold(z: &[f64]) -> (f64, usize) {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support = 0;
    let mut support_sum = 0.0;
    for (i, &zi) in sorted.iter().enumerate() {
        cumsum += zi;
        let k = (i + 1) as f64;
        if 1.0 + k * zi > cumsum {
            support = i + 1;
            support_sum = cumsum;
        }
    }
    ((support_sum - 1.0) / support as f64, support)
}

/// Euclidean projection of `values / temperature` onto the probability
/// simplex. Actions outside the active set get exactly zero.
pub fn sparsemax(input: &SparsemaxInput) -> Vec<f64> {
    let z = input.scores();
    let (t, _) = sparsemax_threshold(&z);
    let mut p: Vec<f64> = z.iter().map(|zi| (zi - t).max(0.0)).collect();
    // Exact renormalization over the active set removes the last ulp of drift.
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}
