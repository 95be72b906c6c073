//! A small fully-connected classifier with exact manual backpropagation.
//!
//! The model is deliberately tiny — a few dense layers on a synthetic
//! Gaussian-cluster problem — but every matrix product in both passes goes
//! through an injected GEMM, so the same network trains under exact f64
//! arithmetic or any quantized GEMM a caller supplies. Forward products use
//! one injected function and backward (gradient-carrying) products another,
//! mirroring systems that pick different 8-bit formats for the two passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `C = A·B` for row-major flat slices, `A` is m×k, `B` is k×n.
pub type GemmFn<'a> = &'a dyn Fn(&[f64], &[f64], usize, usize, usize) -> Vec<f64>;

/// The pair of GEMM implementations a training pass runs on: `forward` for
/// activation products, `backward` for products with a gradient operand
/// (which is always passed as the left operand).
#[derive(Clone, Copy)]
pub struct GemmPair<'a> {
    pub forward: GemmFn<'a>,
    pub backward: GemmFn<'a>,
}

/// Plain f64 matrix product.
pub fn exact_gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let row = &b[p * n..(p + 1) * n];
            let out = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                out[j] += aip * row[j];
            }
        }
    }
    c
}

impl GemmPair<'static> {
    /// Exact f64 products in both passes.
    pub fn exact() -> GemmPair<'static> {
        GemmPair { forward: &exact_gemm, backward: &exact_gemm }
    }
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

const SQRT_2_OVER_PI: f64 = 0.7978845608028654;

/// Smooth GELU (tanh form): `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}

/// Exact derivative of [`gelu`].
pub fn gelu_prime(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Synthetic classification data: one Gaussian cluster per class.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Row-major samples, `samples × dim`.
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Row-major batch of `count` samples starting at `start`, wrapping
    /// around the dataset, plus their labels. Deterministic, so every
    /// training configuration sees the same data order.
    pub fn batch(&self, start: usize, count: usize) -> (Vec<f64>, Vec<usize>) {
        let mut x = Vec::with_capacity(count * self.dim);
        let mut y = Vec::with_capacity(count);
        for i in 0..count {
            let idx = (start + i) % self.len();
            x.extend_from_slice(&self.inputs[idx * self.dim..(idx + 1) * self.dim]);
            y.push(self.labels[idx]);
        }
        (x, y)
    }
}

/// Well-separated Gaussian clusters: class centers are standard normal,
/// samples add noise with a quarter of the center spread.
pub fn gaussian_clusters(dim: usize, classes: usize, samples: usize, seed: u64) -> Dataset {
    gaussian_clusters_with_noise(dim, classes, samples, 0.0, seed)
}

/// Gaussian clusters with a fraction of labels flipped to a random other
/// class. The flips give the achievable loss a stable nonzero floor, which
/// keeps relative comparisons between converged runs meaningful.
pub fn gaussian_clusters_with_noise(
    dim: usize,
    classes: usize,
    samples: usize,
    label_noise: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, 0.25).unwrap();
    let centers: Vec<f64> =
        (0..classes * dim).map(|_| std_normal.sample(&mut rng)).collect();
    let mut inputs = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = i % classes;
        for j in 0..dim {
            inputs.push(centers[class * dim + j] + noise.sample(&mut rng));
        }
        let label = if label_noise > 0.0 && classes > 1 && rng.gen_bool(label_noise) {
            (class + rng.gen_range(1..classes)) % classes
        } else {
            class
        };
        labels.push(label);
    }
    Dataset { inputs, labels, dim, classes }
}

/// Dense classifier: affine layers with GELU between them, cross-entropy on
/// the final logits. Parameters are kept as separate tensors (weight and
/// bias per layer) so per-tensor machinery downstream sees realistic units.
#[derive(Debug, Clone)]
pub struct TinyModel {
    /// Layer widths, input first: e.g. `[32, 64, 64, 16]`.
    pub dims: Vec<usize>,
    /// `[w1, b1, w2, b2, ...]`; weights are row-major `out × in`.
    pub params: Vec<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    batch: usize,
    /// Layer inputs: `h[0]` is the batch, `h[l]` the activation entering
    /// layer `l`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre_acts: Vec<Vec<f64>>,
    /// Softmax probabilities for each sample.
    probs: Vec<f64>,
    labels: Vec<usize>,
}

impl TinyModel {
    /// Default geometry used by the training harness.
    pub fn standard(seed: u64) -> TinyModel {
        TinyModel::new(&[32, 64, 64, 16], seed)
    }

    /// Random initialization: weights are normal with std √(2 / fan_in),
    /// biases zero.
    pub fn new(dims: &[usize], seed: u64) -> TinyModel {
        assert!(dims.len() >= 2, "need at least one layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            params.push((0..fan_out * fan_in).map(|_| dist.sample(&mut rng)).collect());
            params.push(vec![0.0; fan_out]);
        }
        TinyModel { dims: dims.to_vec(), params }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    /// Tensor names in parameter order: `w1, b1, w2, b2, ...`.
    pub fn param_names(&self) -> Vec<String> {
        (0..self.layer_count())
            .flat_map(|l| [format!("w{}", l + 1), format!("b{}", l + 1)])
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Mean cross-entropy of one batch (`x` row-major `batch × input_dim`),
    /// with the intermediates needed for [`TinyModel::backward`].
    pub fn forward_loss(
        &self,
        x: &[f64],
        labels: &[usize],
        gemm: GemmPair<'_>,
    ) -> (f64, ForwardCache) {
        let batch = labels.len();
        assert_eq!(x.len(), batch * self.input_dim());
        let layers = self.layer_count();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre_acts = Vec::with_capacity(layers - 1);
        let mut h = x.to_vec();
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[2 * l];
            let b = &self.params[2 * l + 1];
            let wt = transpose(w, fan_out, fan_in);
            let mut z = (gemm.forward)(&h, &wt, batch, fan_in, fan_out);
            for i in 0..batch {
                for j in 0..fan_out {
                    z[i * fan_out + j] += b[j];
                }
            }
            inputs.push(std::mem::take(&mut h));
            if l + 1 < layers {
                pre_acts.push(z.clone());
                h = z.iter().map(|&v| gelu(v)).collect();
            } else {
                h = z;
            }
        }
        let logits = h;

        // numerically safe softmax cross-entropy via log-sum-exp
        let classes = self.output_dim();
        let mut probs = vec![0.0; batch * classes];
        let mut loss = 0.0;
        for i in 0..batch {
            let row = &logits[i * classes..(i + 1) * classes];
            let peak = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&v| (v - peak).exp()).sum();
            let lse = peak + sum.ln();
            loss += lse - row[labels[i]];
            for j in 0..classes {
                probs[i * classes + j] = (row[j] - lse).exp();
            }
        }
        loss /= batch as f64;
        (loss, ForwardCache { batch, inputs, pre_acts, probs, labels: labels.to_vec() })
    }

    /// Gradients of the mean batch loss for every parameter tensor, in
    /// parameter order. Gradient-carrying products go through
    /// `gemm.backward` with the gradient as the left operand.
    pub fn backward(&self, cache: &ForwardCache, gemm: GemmPair<'_>) -> Vec<Vec<f64>> {
        self.backward_with_scale(cache, gemm, 1.0)
    }

    /// [`Self::backward`] with the loss gradient multiplied by `grad_scale`
    /// before it enters the chain, so every returned gradient carries the
    /// same factor. Callers that scale to protect a narrow-range backward
    /// format must divide the results back down afterwards.
    pub fn backward_with_scale(
        &self,
        cache: &ForwardCache,
        gemm: GemmPair<'_>,
        grad_scale: f64,
    ) -> Vec<Vec<f64>> {
        let layers = self.layer_count();
        let batch = cache.batch;
        let classes = self.output_dim();

        // d loss / d logits = (softmax − one-hot) / batch
        let mut dz = cache.probs.clone();
        for i in 0..batch {
            dz[i * classes + cache.labels[i]] -= 1.0;
        }
        for v in dz.iter_mut() {
            *v = *v * grad_scale / batch as f64;
        }

        let mut grads = vec![Vec::new(); 2 * layers];
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let h = &cache.inputs[l];
            // dW = dzᵀ · h, db = column sums of dz
            let dzt = transpose(&dz, batch, fan_out);
            grads[2 * l] = (gemm.backward)(&dzt, h, fan_out, batch, fan_in);
            let mut db = vec![0.0; fan_out];
            for i in 0..batch {
                for j in 0..fan_out {
                    db[j] += dz[i * fan_out + j];
                }
            }
            grads[2 * l + 1] = db;
            if l > 0 {
                // dh = dz · W, then through the activation
                let w = &self.params[2 * l];
                let dh = (gemm.backward)(&dz, w, batch, fan_out, fan_in);
                let z_prev = &cache.pre_acts[l - 1];
                dz = dh
                    .iter()
                    .zip(z_prev)
                    .map(|(&g, &z)| g * gelu_prime(z))
                    .collect();
            }
        }
        grads
    }

    /// Forward and backward in one call.
    pub fn loss_and_grads(
        &self,
        x: &[f64],
        labels: &[usize],
        gemm: GemmPair<'_>,
    ) -> (f64, Vec<Vec<f64>>) {
        let (loss, cache) = self.forward_loss(x, labels, gemm);
        (loss, self.backward(&cache, gemm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_gelu_frozen_values() {
        let cases = [
            (0.0, 0.0),
            (0.5, 0.34571400982514394),
            (1.0, 0.8411919906082768),
            (-1.0, -0.15880800939172324),
            (2.0, 1.954597694087775),
            (-2.0, -0.04540230591222494),
            (3.5, 3.499383802344626),
        ];
        for (x, want) in cases {
            assert!((gelu(x) - want).abs() < 1e-15, "gelu({x})");
        }
    }

    #[test]
    fn test_gelu_prime_matches_numeric_derivative() {
        let h = 1e-6;
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let numeric = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!(
                (gelu_prime(x) - numeric).abs() < 1e-8,
                "x = {x}: {} vs {numeric}",
                gelu_prime(x)
            );
        }
    }

    #[test]
    fn test_exact_gemm_small_case() {
        // [1 2; 3 4] · [5 6; 7 8] = [19 22; 43 50]
        let c = exact_gemm(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0], 2, 2, 2);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
        // identity passthrough
        let b = [0.5, -1.5, 2.0, 0.25, 3.0, -0.75];
        let id = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(exact_gemm(&id, &b, 2, 2, 3), b.to_vec());
    }

    #[test]
    fn test_transpose_roundtrip() {
        let a: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let t = transpose(&a, 3, 4);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 4.0); // column 0 of a becomes row 0 of t
        assert_eq!(transpose(&t, 4, 3), a);
    }

    #[test]
    fn test_dataset_shapes_and_determinism() {
        let d1 = gaussian_clusters(8, 4, 64, 99);
        assert_eq!(d1.len(), 64);
        assert_eq!(d1.inputs.len(), 64 * 8);
        assert!(d1.labels.iter().all(|&l| l < 4));
        // every class appears equally often
        for c in 0..4 {
            assert_eq!(d1.labels.iter().filter(|&&l| l == c).count(), 16);
        }
        let d2 = gaussian_clusters(8, 4, 64, 99);
        assert_eq!(d1.inputs, d2.inputs);
        let d3 = gaussian_clusters(8, 4, 64, 100);
        assert_ne!(d1.inputs, d3.inputs);
    }

    #[test]
    fn test_batch_wraps_around() {
        let d = gaussian_clusters(4, 2, 10, 5);
        let (x, y) = d.batch(8, 4);
        assert_eq!(x.len(), 16);
        assert_eq!(y.len(), 4);
        assert_eq!(y[2], d.labels[0]); // wrapped to the start
        assert_eq!(x[8..12], d.inputs[0..4]);
    }

    #[test]
    fn test_initial_loss_near_uniform_guess() {
        let model = TinyModel::standard(3);
        let data = gaussian_clusters(32, 16, 256, 7);
        let (x, y) = data.batch(0, 128);
        let (loss, _) = model.forward_loss(&x, &y, GemmPair::exact());
        let uniform = (16.0f64).ln();
        assert!((loss - uniform).abs() < 0.35 * uniform, "initial loss {loss}");
    }

    #[test]
    fn test_gradients_match_central_differences() {
        let mut model = TinyModel::new(&[6, 10, 8, 4], 11);
        let data = gaussian_clusters(6, 4, 32, 13);
        let (x, y) = data.batch(0, 16);
        let (_, grads) = model.loss_and_grads(&x, &y, GemmPair::exact());

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for _ in 0..100 {
            let tensor = rng.gen_range(0..model.params.len());
            let coord = rng.gen_range(0..model.params[tensor].len());
            let saved = model.params[tensor][coord];

            model.params[tensor][coord] = saved + h;
            let (lp, _) = model.forward_loss(&x, &y, GemmPair::exact());
            model.params[tensor][coord] = saved - h;
            let (lm, _) = model.forward_loss(&x, &y, GemmPair::exact());
            model.params[tensor][coord] = saved;

            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads[tensor][coord];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                rel <= 1e-5,
                "tensor {tensor} coord {coord}: analytic {analytic} numeric {numeric} rel {rel}"
            );
        }
    }

    #[test]
    fn test_plain_gradient_descent_learns() {
        let mut model = TinyModel::new(&[8, 24, 24, 4], 21);
        let data = gaussian_clusters(8, 4, 64, 23);
        let (x, y) = data.batch(0, 64);
        let (initial, _) = model.forward_loss(&x, &y, GemmPair::exact());
        for _ in 0..60 {
            let (_, grads) = model.loss_and_grads(&x, &y, GemmPair::exact());
            for (tensor, grad) in model.params.iter_mut().zip(&grads) {
                for (p, g) in tensor.iter_mut().zip(grad) {
                    *p -= 0.5 * g;
                }
            }
        }
        let (fin, _) = model.forward_loss(&x, &y, GemmPair::exact());
        assert!(fin < 0.5 * initial, "loss {initial} -> {fin}");
    }

    #[test]
    fn test_param_layout() {
        let model = TinyModel::standard(1);
        assert_eq!(model.num_params(), 32 * 64 + 64 + 64 * 64 + 64 + 64 * 16 + 16);
        assert_eq!(model.param_names(), vec!["w1", "b1", "w2", "b2", "w3", "b3"]);
        assert_eq!(model.params[0].len(), 64 * 32);
        assert_eq!(model.params[5].len(), 16);
    }

    #[test]
    fn test_injected_gemm_is_used() {
        // a GEMM that scales every product is visible in the loss
        let doubling = |a: &[f64], b: &[f64], m: usize, k: usize, n: usize| {
            exact_gemm(a, b, m, k, n).iter().map(|v| 2.0 * v).collect::<Vec<f64>>()
        };
        let model = TinyModel::new(&[4, 6, 3], 2);
        let data = gaussian_clusters(4, 3, 12, 3);
        let (x, y) = data.batch(0, 8);
        let (exact_loss, _) = model.forward_loss(&x, &y, GemmPair::exact());
        let pair = GemmPair { forward: &doubling, backward: &exact_gemm };
        let (doubled_loss, _) = model.forward_loss(&x, &y, pair);
        assert_ne!(exact_loss, doubled_loss);
    }
}
