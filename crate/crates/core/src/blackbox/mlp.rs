//! Small MLP: 1–2 ReLU hidden layers, logistic output, mini-batch gradient
//! descent. Initialization and batch order come from a seeded RNG, so
//! training is deterministic.

use crate::matrix::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// Row-major `in_dim x out_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
        DenseLayer {
            weights: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-s..s))
                .collect(),
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let mut z = self.bias[o];
            for i in 0..self.in_dim {
                z += input[i] * self.weights[i * self.out_dim + o];
            }
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Hidden layers (ReLU) followed by a single-logit output layer.
    pub layers: Vec<DenseLayer>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpParams {
    /// Output probability; prediction thresholds at 0.5.
    pub fn probability(&self, row: &[f64]) -> f64 {
        let mut a: Vec<f64> = row.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if l < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        sigmoid(a[0])
    }
}

pub fn train(
    features: &Matrix,
    labels: &[u8],
    hidden: &[usize],
    learning_rate: f64,
    epochs: u32,
    seed: u64,
) -> MlpParams {
    let n = features.n_rows();
    let d = features.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut dims = vec![d];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let mut layers: Vec<DenseLayer> = dims
        .windows(2)
        .map(|w| DenseLayer::glorot(w[0], w[1], &mut rng))
        .collect();
    let n_layers = layers.len();

    let mut order: Vec<usize> = (0..n).collect();
    // Forward activations per layer (post-nonlinearity), reused per example.
    let mut acts: Vec<Vec<f64>> = dims.iter().map(|&k| vec![0.0; k]).collect();
    let mut deltas: Vec<Vec<f64>> = dims[1..].iter().map(|&k| vec![0.0; k]).collect();

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(BATCH_SIZE) {
            let mut grads_w: Vec<Vec<f64>> =
                layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
            let mut grads_b: Vec<Vec<f64>> =
                layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
            for &i in batch {
                let row = features.row(i);
                acts[0].copy_from_slice(row);
                for l in 0..n_layers {
                    let (head, tail) = acts.split_at_mut(l + 1);
                    let mut buf = std::mem::take(&mut tail[0]);
                    layers[l].forward(&head[l], &mut buf);
                    if l < n_layers - 1 {
                        for v in &mut buf {
                            *v = v.max(0.0);
                        }
                    }
                    tail[0] = buf;
                }
                let p = sigmoid(acts[n_layers][0]);
                deltas[n_layers - 1][0] = p - labels[i] as f64;
                for l in (0..n_layers - 1).rev() {
                    let next = &layers[l + 1];
                    for j in 0..next.in_dim {
                        let mut s = 0.0;
                        for o in 0..next.out_dim {
                            s += next.weights[j * next.out_dim + o] * deltas[l + 1][o];
                        }
                        // ReLU gate from the forward pass.
                        deltas[l][j] = if acts[l + 1][j] > 0.0 { s } else { 0.0 };
                    }
                }
                for l in 0..n_layers {
                    let layer = &layers[l];
                    for j in 0..layer.in_dim {
                        let a = acts[l][j];
                        if a == 0.0 {
                            continue;
                        }
                        for o in 0..layer.out_dim {
                            grads_w[l][j * layer.out_dim + o] += a * deltas[l][o];
                        }
                    }
                    for o in 0..layer.out_dim {
                        grads_b[l][o] += deltas[l][o];
                    }
                }
            }
            let scale = learning_rate / batch.len() as f64;
            for l in 0..n_layers {
                for (w, g) in layers[l].weights.iter_mut().zip(&grads_w[l]) {
                    *w -= scale * g;
                }
                for (b, g) in layers[l].bias.iter_mut().zip(&grads_b[l]) {
                    *b -= scale * g;
                }
            }
        }
    }
    MlpParams { layers }
}
