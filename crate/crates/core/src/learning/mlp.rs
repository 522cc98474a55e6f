use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

/// Fully connected network with Leaky-ReLU hidden layers and a linear output.
///
/// Parameters are stored flat, layer by layer: the weight matrix
/// (`out × in`, row-major) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("invalid layer dimensions {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-limit..limit));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Mlp { dims: dims.to_vec(), params })
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("invalid layer dimensions {dims:?}")));
        }
        if params.len() != param_count(dims) {
            return Err(Error::LengthMismatch { expected: param_count(dims), actual: params.len() });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Mlp { dims: dims.to_vec(), params })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    /// Forward pass; fills `out` with the network output.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::LengthMismatch { expected: self.input_dim(), actual: x.len() });
        }
        if out.len() != self.output_dim() {
            return Err(Error::LengthMismatch { expected: self.output_dim(), actual: out.len() });
        }
        let mut cur = x.to_vec();
        let mut offset = 0;
        let layers = self.dims.len() - 1;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let next: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = bias[o] + weights[o * n_in..(o + 1) * n_in].iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
                    if l + 1 < layers {
                        leaky(z)
                    } else {
                        z
                    }
                })
                .collect();
            cur = next;
        }
        out.copy_from_slice(&cur);
        Ok(())
    }

    /// Accumulates the gradient of `Σ |f(x) − y|` (unnormalised) for one
    /// sample into `grad` and returns that sum.
    fn accumulate(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let layers = self.dims.len() - 1;
        // Pre-activations and activations per layer.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(layers);
        acts.push(x.to_vec());
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            offsets.push(offset);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let input = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| bias[o] + weights[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let a = if l + 1 < layers { z.iter().map(|&v| leaky(v)).collect() } else { z.clone() };
            pres.push(z);
            acts.push(a);
        }
        let pred = &acts[layers];
        let mut loss = 0.0;
        let mut delta: Vec<f64> = pred
            .iter()
            .zip(y)
            .map(|(&p, &t)| {
                let r = p - t;
                loss += r.abs();
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    for (g, &a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                let mut back = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        for (b, &w) in back.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                            *b += d * w;
                        }
                    }
                }
                for (b, &z) in back.iter_mut().zip(&pres[l - 1]) {
                    *b *= leaky_grad(z);
                }
                delta = back;
            }
        }
        loss
    }

    /// Mean absolute error over every output element of the batch and its
    /// gradient. At an exact zero residual the subgradient 0 is used.
    ///
    /// `inputs` and `targets` are row-major with `input_dim` / `output_dim`
    /// columns; `rows` selects the batch. The batch is split into fixed
    /// chunks whose partial sums are added in order, so the result does not
    /// depend on the thread count.
    pub fn loss_and_gradient(&self, inputs: &[f64], targets: &[f64], rows: &[usize]) -> Result<(f64, Vec<f64>)> {
        if rows.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let (ni, no) = (self.input_dim(), self.output_dim());
        const CHUNK: usize = 64;
        let partials: Vec<(f64, Vec<f64>)> = rows
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; self.params.len()];
                let mut loss = 0.0;
                for &r in chunk {
                    loss += self.accumulate(&inputs[r * ni..(r + 1) * ni], &targets[r * no..(r + 1) * no], &mut g);
                }
                (loss, g)
            })
            .collect();
        let norm = 1.0 / (rows.len() * no) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        grad.iter_mut().for_each(|g| *g *= norm);
        Ok((loss * norm, grad))
    }

    /// Mean absolute error over `rows` without gradients.
    pub fn loss(&self, inputs: &[f64], targets: &[f64], rows: &[usize]) -> f64 {
        let (ni, no) = (self.input_dim(), self.output_dim());
        let mut out = vec![0.0; no];
        let mut total = 0.0;
        for &r in rows {
            self.forward(&inputs[r * ni..(r + 1) * ni], &mut out).expect("row width matches");
            total += out.iter().zip(&targets[r * no..(r + 1) * no]).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        total / (rows.len().max(1) * no) as f64
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
