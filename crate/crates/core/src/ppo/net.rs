use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::PpoError;
use crate::seeds::Rng;

/// Fully connected network with tanh hidden units and a linear output.
///
/// Parameters live in one flat buffer: for each layer the row-major
/// `out x in` weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

impl Forward {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least the input")
    }
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs input and output sizes");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; Self::param_count(sizes)],
        }
    }

    /// Uniform weights with variance `gain^2 / fan_in` per layer, zero biases.
    /// `final_gain` overrides the gain of the output layer.
    pub fn init(sizes: &[usize], gain: f64, final_gain: f64, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let g = if l + 1 == layers { final_gain } else { gain };
            let a = g * (3.0 / n_in as f64).sqrt();
            for w in &mut net.params[off..off + n_in * n_out] {
                *w = if a == 0.0 { 0.0 } else { rng.random_range(-a..a) };
            }
            off += n_in * n_out + n_out;
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward, PpoError> {
        if x.len() != self.input_dim() {
            return Err(PpoError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for (l, (off, n_in, n_out)) in self.layer_offsets().enumerate() {
            let input = &acts[l];
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let mut y: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        Ok(Forward { acts })
    }

    /// Accumulate `dL/dparams` into `grad` given `dL/doutput`.
    pub fn backward(&self, fwd: &Forward, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let offsets: Vec<_> = self.layer_offsets().collect();
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (off, n_in, n_out) = offsets[l];
            if l + 1 < layers {
                let h = &fwd.acts[l + 1];
                for (d, hv) in delta.iter_mut().zip(h) {
                    *d *= 1.0 - hv * hv;
                }
            }
            let input = &fwd.acts[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                gb[o] += delta[o];
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += delta[o] * x;
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    for (i, nx) in next.iter_mut().enumerate() {
                        *nx += w[o * n_in + i] * delta[o];
                    }
                }
                delta = next;
            }
        }
    }
}

pub const HIDDEN: usize = 64;

/// Policy and value networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub policy: Mlp,
    pub value: Mlp,
}

impl PolicyParams {
    /// `dim -> hidden -> hidden -> 3` policy and `dim -> hidden -> hidden -> 1` value net.
    pub fn init(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let gain = std::f64::consts::SQRT_2;
        Self {
            policy: Mlp::init(&[dim, hidden, hidden, 3], gain, 0.01, rng),
            value: Mlp::init(&[dim, hidden, hidden, 1], gain, 1.0, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.policy.params.len() + self.value.params.len()
    }

    pub fn all_finite(&self) -> bool {
        self.policy.params.iter().chain(&self.value.params).all(|v| v.is_finite())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}
