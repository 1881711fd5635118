use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Fully connected layer, weights stored row-major (`outputs x inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.biases);
        // column-wise accumulation lets zero inputs be skipped
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
                *o += row[j] * xj;
            }
        }
    }
}

/// Relu hidden layers followed by a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

pub const HIDDEN_SIZES: [usize; 2] = [128, 64];

/// He-initialized `n -> 128 -> 64 -> m` network with zero biases.
pub fn init_network(n: usize, m: usize, seed: u64) -> NetworkParams {
    init_with_sizes(&[n, HIDDEN_SIZES[0], HIDDEN_SIZES[1], m], seed)
}

/// He-initialized network over arbitrary layer sizes `[input, hidden..., output]`.
pub fn init_with_sizes(sizes: &[usize], seed: u64) -> NetworkParams {
    assert!(sizes.len() >= 2, "a network needs an input and an output size");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (inputs, outputs) = (w[0], w[1]);
            let std = (2.0 / inputs.max(1) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            Layer {
                inputs,
                outputs,
                weights: (0..inputs * outputs).map(|_| normal.sample(&mut rng)).collect(),
                biases: vec![0.0; outputs],
            }
        })
        .collect();
    NetworkParams { layers }
}

/// Per-layer values kept for backpropagation.
struct Trace {
    /// activations entering each layer; `activations[0]` is the input
    activations: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.outputs, l.inputs)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        let mut output = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(&current, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                activations.push(std::mem::replace(&mut current, z));
            } else {
                activations.push(std::mem::take(&mut current));
                output = z;
            }
        }
        Trace {
            activations,
            output,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_size(), "input length");
        self.trace(x).output
    }

    /// Pre-activation values of every layer, used to detect relu kinks.
    pub fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut current = x.to_vec();
        let mut out = Vec::new();
        for layer in &self.layers {
            let mut z = Vec::new();
            layer.affine(&current, &mut z);
            current = z.iter().map(|v| v.max(0.0)).collect();
            out.push(z);
        }
        out
    }
}

/// Pairs a network input with the vector it should produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum over the batch of squared distances between output and target.
pub fn loss(params: &NetworkParams, batch: &[TrainingSample]) -> f64 {
    batch
        .iter()
        .map(|s| squared_error(&params.forward(&s.input), &s.target))
        .sum()
}

/// Exact gradient of [`loss`], accumulated into `grads`. Returns the loss.
pub fn accumulate_gradients(params: &NetworkParams, batch: &[TrainingSample], grads: &mut NetworkParams) -> f64 {
    let mut total = 0.0;
    let last = params.layers.len() - 1;
    for sample in batch {
        let trace = params.trace(&sample.input);
        total += squared_error(&trace.output, &sample.target);
        let mut delta: Vec<f64> = trace
            .output
            .iter()
            .zip(&sample.target)
            .map(|(o, t)| 2.0 * (o - t))
            .collect();
        for li in (0..=last).rev() {
            let layer = &params.layers[li];
            let input = &trace.activations[li];
            let g = &mut grads.layers[li];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[r] += d;
                let row = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for (w, &a) in row.iter_mut().zip(input) {
                    *w += d * a;
                }
            }
            if li == 0 {
                break;
            }
            // back through the weights, then the relu that produced `input`
            let mut next = vec![0.0; layer.inputs];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            for (n, &a) in next.iter_mut().zip(input) {
                if a <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }
    total
}

pub fn gradients(params: &NetworkParams, batch: &[TrainingSample]) -> NetworkParams {
    let mut grads = params.zeros_like();
    accumulate_gradients(params, batch, &mut grads);
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, m: usize, count: usize) -> Vec<TrainingSample> {
        (0..count)
            .map(|_| TrainingSample {
                input: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                target: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    /// Straight-line re-implementation of the three matrix products.
    fn reference_forward(p: &NetworkParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (i, l) in p.layers.iter().enumerate() {
            let mut z = vec![0.0; l.outputs];
            for r in 0..l.outputs {
                let mut s = l.biases[r];
                for c in 0..l.inputs {
                    s += l.weight(r, c) * a[c];
                }
                z[r] = if i + 1 < p.layers.len() { s.max(0.0) } else { s };
            }
            a = z;
        }
        a
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = init_network(252, 32, 7);
        assert_eq!(a.shapes(), vec![(128, 252), (64, 128), (32, 64)]);
        assert_eq!(a, init_network(252, 32, 7));
        assert_ne!(a, init_network(252, 32, 8));
        assert!(a.layers.iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut p = init_network(5, 3, 1);
        p.values_mut().for_each(|v| *v = 0.0);
        assert_eq!(p.forward(&[1.0, 2.0, 3.0, 4.0, 5.0]), vec![0.0; 3]);
        let q = init_network(5, 3, 1);
        assert_eq!(q.forward(&[0.0; 5]), vec![0.0; 3]);
    }

    #[test]
    fn forward_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = init_with_sizes(&[12, 9, 6, 4], 11);
        p.values_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
        for _ in 0..20 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = p.forward(&x);
            let b = reference_forward(&p, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loss_examples() {
        let mut p = init_with_sizes(&[2, 3, 3, 2], 1);
        p.values_mut().for_each(|v| *v = 0.0);
        p.layers[2].biases = vec![1.0, 0.0];
        let hit = TrainingSample { input: vec![1.0, 1.0], target: vec![1.0, 0.0] };
        assert_eq!(loss(&p, &[hit.clone()]), 0.0);
        let off = TrainingSample { input: vec![1.0, 1.0], target: vec![0.0, 0.0] };
        assert_eq!(loss(&p, &[off]), 1.0);
        let g = gradients(&p, &[hit]);
        assert!(g.values().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = init_with_sizes(&[6, 5, 4, 3], 2);
        let batch = random_batch(&mut rng, 6, 3, 7);
        let expected: f64 = batch
            .iter()
            .map(|s| {
                let out = reference_forward(&p, &s.input);
                (0..3).map(|k| (out[k] - s.target[k]).powi(2)).sum::<f64>()
            })
            .sum();
        assert!((loss(&p, &batch) - expected).abs() < 1e-12);
    }

    #[test]
    fn output_bias_gradient_is_linear_in_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = init_with_sizes(&[6, 5, 4, 3], 4);
        let batch = random_batch(&mut rng, 6, 3, 5);
        let doubled: Vec<TrainingSample> = batch
            .iter()
            .map(|s| TrainingSample {
                input: s.input.clone(),
                target: s.target.iter().map(|t| 2.0 * t).collect(),
            })
            .collect();
        // d/db3 = 2 * sum(out - target)
        let outputs: Vec<Vec<f64>> = batch.iter().map(|s| p.forward(&s.input)).collect();
        let g1 = gradients(&p, &batch);
        let g2 = gradients(&p, &doubled);
        for k in 0..3 {
            let sum_out: f64 = outputs.iter().map(|o| o[k]).sum();
            let sum_t: f64 = batch.iter().map(|s| s.target[k]).sum();
            assert!((g1.layers[2].biases[k] - 2.0 * (sum_out - sum_t)).abs() < 1e-12);
            assert!((g2.layers[2].biases[k] - 2.0 * (sum_out - 2.0 * sum_t)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = init_with_sizes(&[10, 8, 4, 3], 5);
        let batch = random_batch(&mut rng, 10, 3, 4);
        let g = gradients(&p, &batch);
        let analytic: Vec<f64> = g.values().copied().collect();
        let h = 1e-4;
        for i in 0..analytic.len() {
            let mut plus = p.clone();
            *plus.values_mut().nth(i).unwrap() += h;
            let mut minus = p.clone();
            *minus.values_mut().nth(i).unwrap() -= h;
            let numeric = (loss(&plus, &batch) - loss(&minus, &batch)) / (2.0 * h);
            let rel = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-7);
            assert!(rel < 1e-5, "param {i}: analytic {} numeric {numeric}", analytic[i]);
        }
    }
}
