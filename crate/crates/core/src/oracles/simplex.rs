use crate::error::{Error, Result};

const MAX_LEN: usize = 12;

/// Euclidean projection onto the probability simplex by enumerating every
/// candidate active set. Exponential in the length; limited to 12.
pub fn project_simplex_bruteforce(v: &[f64]) -> Result<Vec<f64>> {
    let k = v.len();
    if k == 0 || k > MAX_LEN {
        return Err(Error::domain(format!(
            "brute-force projection supports lengths 1..={MAX_LEN}, got {k}"
        )));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let size = mask.count_ones() as f64;
        let sum: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
        let shift = (sum - 1.0) / size;
        let p: Vec<f64> = (0..k)
            .map(|i| if mask >> i & 1 == 1 { v[i] - shift } else { 0.0 })
            .collect();
        if p.iter().any(|x| *x < 0.0) {
            continue;
        }
        let dist: f64 = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, p));
        }
    }
    Ok(best.expect("the best vertex is always feasible").1)
}
