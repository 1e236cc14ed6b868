//! Dense ReLU networks with hand-written backpropagation, Adam and Polyak
//! averaging.
//!
//! Parameters live in one flat vector so optimizers and target updates are
//! plain elementwise loops. Layer `l` stores its `out × in` weight matrix
//! (row-major) followed by its `out` biases.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};

use crate::error::{check_dim, Error, Result};
use crate::samplers::Rng;

/// Weights and biases of a fully connected network with ReLU hidden layers
/// and a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    data: Vec<f64>,
}

/// Activations recorded by a forward pass: the input, every hidden
/// post-activation and the output.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }

    pub fn input(&self) -> &[f64] {
        self.acts.first().map_or(&[], Vec::as_slice)
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl MlpParams {
    /// All-zero network with the given layer widths (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::domain(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { sizes: sizes.to_vec(), data: vec![0.0; param_count(sizes)] })
    }

    /// Weights and biases uniform on `±√(1/fan_in)`.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = (1.0 / w[0] as f64).sqrt();
            for v in &mut p.data[off..off + w[1] * (w[0] + 1)] {
                *v = bound * (2.0 * rng.uniform() - 1.0);
            }
            off += w[1] * (w[0] + 1);
        }
        Ok(p)
    }

    /// Rebuilds a network from layer widths and a flat parameter vector.
    pub fn from_parts(sizes: &[usize], data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        check_dim(p.data.len(), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("network parameters must be finite"));
        }
        p.data = data;
        Ok(p)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Weight matrix and bias vector of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off: usize = self.sizes[..=l].windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.data[off..off + o * i];
        (w, &self.data[off + o * i..off + o * (i + 1)])
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.sizes != other.sizes {
            return Err(Error::domain(format!(
                "network shapes differ: {:?} vs {:?}",
                self.sizes, other.sizes
            )));
        }
        Ok(())
    }

    /// Forward pass keeping the activations needed by [`Self::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        check_dim(self.input_dim(), input.len())?;
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.data[off..off + n_out * n_in];
            let b = &self.data[off + n_out * n_in..off + n_out * (n_in + 1)];
            let x = &acts[l];
            let mut y: Vec<f64> = (0..n_out)
                .map(|j| b[j] + dot(&w[j * n_in..(j + 1) * n_in], x))
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
            off += n_out * (n_in + 1);
        }
        let out = acts.last().expect("output layer").clone();
        Ok((out, Tape { acts }))
    }

    /// Forward pass without a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), input.len())?;
        let layers = self.sizes.len() - 1;
        let mut x = input.to_vec();
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.data[off..off + n_out * n_in];
            let b = &self.data[off + n_out * n_in..off + n_out * (n_in + 1)];
            let relu = l + 1 < layers;
            x = (0..n_out)
                .map(|j| {
                    let v = b[j] + dot(&w[j * n_in..(j + 1) * n_in], &x);
                    if relu {
                        v.max(0.0)
                    } else {
                        v
                    }
                })
                .collect();
            off += n_out * (n_in + 1);
        }
        Ok(x)
    }

    /// Gradient of `⟨grad_output, output⟩` with respect to every parameter
    /// (added into `acc`) and with respect to the input (returned).
    pub fn backward_into(&self, tape: &Tape, grad_output: &[f64], acc: &mut [f64]) -> Result<Vec<f64>> {
        check_dim(self.data.len(), acc.len())?;
        self.backprop(tape, grad_output, Some(acc))
    }

    /// Gradient of `⟨grad_output, output⟩` with respect to the input only.
    pub fn input_gradient(&self, tape: &Tape, grad_output: &[f64]) -> Result<Vec<f64>> {
        self.backprop(tape, grad_output, None)
    }

    fn backprop(&self, tape: &Tape, grad_output: &[f64], mut acc: Option<&mut [f64]>) -> Result<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        check_dim(self.output_dim(), grad_output.len())?;
        if tape.acts.len() != layers + 1 || tape.acts[0].len() != self.input_dim() {
            return Err(Error::domain("tape does not come from this network"));
        }
        let mut delta = grad_output.to_vec();
        let mut off = self.data.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= n_out * (n_in + 1);
            let w = &self.data[off..off + n_out * n_in];
            let x = &tape.acts[l];
            let mut dx = vec![0.0; n_in];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = j * n_in..(j + 1) * n_in;
                if let Some(acc) = acc.as_deref_mut() {
                    let (gw, gb) = acc[off..off + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
                    gb[j] += d;
                    for (g, xi) in gw[row.clone()].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
                for (wi, dxi) in w[row].iter().zip(dx.iter_mut()) {
                    *dxi += d * wi;
                }
            }
            if l > 0 {
                // ReLU: the post-activation is positive exactly where the unit was active.
                for (v, a) in dx.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Fresh gradient vectors for the parameters and the input.
    pub fn backward(&self, tape: &Tape, grad_output: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = vec![0.0; self.data.len()];
        let gi = self.backward_into(tape, grad_output, &mut g)?;
        Ok((g, gi))
    }
}

/// Four independent accumulators let the compiler vectorize the loop.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// `target ← (1-α)·target + α·online`.
pub fn polyak_update(target: &mut MlpParams, online: &MlpParams, alpha: f64) -> Result<()> {
    target.check_shape(online)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("Polyak rate must lie in (0, 1], got {alpha}")));
    }
    for (t, o) in target.data.iter_mut().zip(&online.data) {
        *t += alpha * (o - *t);
    }
    Ok(())
}
