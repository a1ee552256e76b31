//! Fixed-architecture feed-forward network with reverse-mode gradients.
//!
//! The architecture is fixed repo-wide: dense layers with `tanh` on hidden
//! layers and identity on the output layer. Weights are row-major with shape
//! `(out_dim, in_dim)`; a layer computes `y = act(W x + b)`.
//!
//! Shape mismatches are programmer error and panic via `assert!`.

use rand::Rng;

use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Parameters of a feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Dense>,
}

/// Gradient of each layer's parameters; shaped exactly like the layer.
#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

/// Parameter-shaped gradients plus the cotangent with respect to the input.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub layers: Vec<DenseGrad>,
    pub d_input: Vec<f64>,
}

/// Post-activation values from a forward pass, kept for the backward pass.
/// `acts[0]` is the input, `acts[k]` the output of layer `k-1`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    acts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least the input")
    }
}

impl MlpParams {
    /// Xavier-uniform initialization, biases zero. `dims` lists the layer
    /// widths from input to output, e.g. `[4, 64, 64, 2]`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "network needs at least one layer");
        assert!(dims.iter().all(|&d| d > 0), "layer widths must be positive");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for win in dims.windows(2) {
            let (in_dim, out_dim) = (win[0], win[1]);
            let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let data: Vec<f64> = (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            layers.push(Dense {
                w: Matrix::from_vec(out_dim, in_dim, data),
                b: vec![0.0; out_dim],
            });
        }
        MlpParams { layers }
    }

    /// All-zero parameters with the given layer widths.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| Dense {
                w: Matrix::zeros(w[1], w[0]),
                b: vec![0.0; w[1]],
            })
            .collect();
        MlpParams { layers }
    }

    /// Assembles a network from explicit layers; consecutive shapes must
    /// compose.
    pub fn from_layers(layers: Vec<Dense>) -> Self {
        assert!(!layers.is_empty(), "network needs at least one layer");
        for win in layers.windows(2) {
            assert_eq!(
                win[1].w.cols(),
                win[0].w.rows(),
                "consecutive layer shapes do not compose"
            );
        }
        for l in &layers {
            assert_eq!(l.b.len(), l.w.rows(), "bias length must match rows");
        }
        MlpParams { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.b.len())
            .sum()
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.w.rows()));
        d
    }

    /// Bit-exact parameter equality (compares the IEEE-754 bit patterns).
    pub fn bit_eq(&self, other: &MlpParams) -> bool {
        if self.layers.len() != other.layers.len() {
            return false;
        }
        self.layers.iter().zip(&other.layers).all(|(a, b)| {
            a.w.rows() == b.w.rows()
                && a.w.cols() == b.w.cols()
                && a.w
                    .data()
                    .iter()
                    .zip(b.w.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
                && a.b
                    .iter()
                    .zip(&b.b)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        })
    }

    /// Forward pass: tanh on hidden layers, identity on the output layer.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_trace(input).acts.pop().unwrap()
    }

    /// Forward pass that keeps per-layer activations for `backward`.
    pub fn forward_trace(&self, input: &[f64]) -> ForwardTrace {
        assert_eq!(
            input.len(),
            self.input_dim(),
            "input length {} does not match network input dim {}",
            input.len(),
            self.input_dim()
        );
        let n_layers = self.layers.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.matvec(acts.last().unwrap());
            for (zi, bi) in z.iter_mut().zip(&layer.b) {
                *zi += bi;
            }
            if k + 1 < n_layers {
                for zi in z.iter_mut() {
                    *zi = zi.tanh();
                }
            }
            acts.push(z);
        }
        ForwardTrace { acts }
    }

    /// Reverse-mode accumulation of `d(upstream . output)/d params`, given the
    /// trace of the corresponding forward pass. Also returns the input
    /// cotangent in `d_input`.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &[f64]) -> MlpGradients {
        assert_eq!(
            upstream.len(),
            self.output_dim(),
            "upstream length {} does not match network output dim {}",
            upstream.len(),
            self.output_dim()
        );
        let n_layers = self.layers.len();
        let mut grads: Vec<DenseGrad> = self
            .layers
            .iter()
            .map(|l| DenseGrad {
                dw: Matrix::zeros(l.w.rows(), l.w.cols()),
                db: vec![0.0; l.b.len()],
            })
            .collect();

        let mut delta = upstream.to_vec();
        for k in (0..n_layers).rev() {
            let layer = &self.layers[k];
            let inputs = &trace.acts[k];
            let outputs = &trace.acts[k + 1];
            // Hidden layers are tanh; convert dL/dy to dL/dz via 1 - y^2.
            if k + 1 < n_layers {
                for (d, y) in delta.iter_mut().zip(outputs) {
                    *d *= 1.0 - y * y;
                }
            }
            let g = &mut grads[k];
            let in_dim = layer.w.cols();
            let mut d_prev = vec![0.0; in_dim];
            for (o, dz) in delta.iter().enumerate() {
                g.db[o] += dz;
                let wrow = layer.w.row(o);
                let grow = g.dw.row_mut(o);
                for i in 0..in_dim {
                    grow[i] += dz * inputs[i];
                    d_prev[i] = wrow[i].mul_add(*dz, d_prev[i]);
                }
            }
            delta = d_prev;
        }
        MlpGradients {
            layers: grads,
            d_input: delta,
        }
    }

    /// Convenience wrapper: forward, then reverse-mode gradients in one call.
    pub fn gradients(&self, input: &[f64], upstream: &[f64]) -> MlpGradients {
        let trace = self.forward_trace(input);
        self.backward(&trace, upstream)
    }
}

impl MlpGradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGradients {
            layers: params
                .layers()
                .iter()
                .map(|l| DenseGrad {
                    dw: Matrix::zeros(l.w.rows(), l.w.cols()),
                    db: vec![0.0; l.b.len()],
                })
                .collect(),
            d_input: vec![0.0; params.input_dim()],
        }
    }

    /// Accumulates `other` into `self` (used for mini-batch sums).
    pub fn add_assign(&mut self, other: &MlpGradients) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.dw.data_mut().iter_mut().zip(b.dw.data()) {
                *x += y;
            }
            for (x, y) in a.db.iter_mut().zip(&b.db) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.layers {
            for x in g.dw.data_mut() {
                *x *= c;
            }
            for x in &mut g.db {
                *x *= c;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.dw.is_finite() && g.db.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_network_passes_input_through() {
        let mut p = MlpParams::zeros(&[2, 2]);
        p.layers_mut()[0].w = Matrix::identity(2);
        assert_eq!(p.forward(&[0.3, -0.3]), vec![0.3, -0.3]);
    }

    #[test]
    fn zero_weights_output_equals_bias() {
        let mut p = MlpParams::zeros(&[3, 4, 2]);
        p.layers_mut()[1].b = vec![1.5, -2.0];
        for input in [[0.0, 0.0, 0.0], [1.0, -1.0, 0.5], [10.0, 3.0, -7.0]] {
            assert_eq!(p.forward(&input), vec![1.5, -2.0]);
        }
    }

    #[test]
    fn two_layer_forward_matches_straight_line_recomputation() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let p = MlpParams::new(&[3, 5, 2], &mut rng);
        let x = [0.2, -0.7, 1.1];

        // Independent recomputation: h = tanh(W1 x + b1); y = W2 h + b2.
        let l1 = &p.layers()[0];
        let mut h = vec![0.0; 5];
        for o in 0..5 {
            let mut acc = l1.b[o];
            for i in 0..3 {
                acc += l1.w.get(o, i) * x[i];
            }
            h[o] = acc.tanh();
        }
        let l2 = &p.layers()[1];
        let mut y = vec![0.0; 2];
        for o in 0..2 {
            let mut acc = l2.b[o];
            for i in 0..5 {
                acc += l2.w.get(o, i) * h[i];
            }
            y[o] = acc;
        }

        let out = p.forward(&x);
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12, "forward {a} vs oracle {b}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let p = MlpParams::new(&[4, 8, 3], &mut rng);
        let g = p.gradients(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0, 0.0]);
        assert!(g.layers.iter().all(|l| l.dw.data().iter().all(|v| *v == 0.0)
            && l.db.iter().all(|v| *v == 0.0)));
        assert!(g.d_input.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_linear_net_gradient_is_input() {
        // y = w * x, upstream 1 => d/dw = x.
        let mut p = MlpParams::zeros(&[1, 1]);
        p.layers_mut()[0].w.set(0, 0, 2.5);
        let x = 1.7;
        let g = p.gradients(&[x], &[1.0]);
        assert!((g.layers[0].dw.get(0, 0) - x).abs() < 1e-15);
        assert!((g.d_input[0] - 2.5).abs() < 1e-15);
    }

    /// Central finite differences at step 1e-5 against reverse-mode gradients,
    /// over every architecture shape used elsewhere in the crate.
    #[test]
    fn gradients_match_finite_differences() {
        let shapes: &[&[usize]] = &[
            &[2, 8, 1],
            &[4, 16, 16, 4],
            &[12, 32, 32, 4],
            &[6, 64, 64, 2],
        ];
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for dims in shapes {
            let p = MlpParams::new(dims, &mut rng);
            let input: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let upstream: Vec<f64> = (0..*dims.last().unwrap())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let max_rel = crate::numkit::fd::fd_error_linear_functional(&p, &input, &upstream);
            assert!(
                max_rel <= 1e-4,
                "finite-difference check failed for {dims:?}: max rel err {max_rel:.3e}"
            );
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = MlpParams::new(&[3, 16, 2], &mut ChaCha12Rng::seed_from_u64(9));
        let b = MlpParams::new(&[3, 16, 2], &mut ChaCha12Rng::seed_from_u64(9));
        assert!(a.bit_eq(&b));
        let x = [0.5, -0.25, 0.125];
        let ya = a.forward(&x);
        let yb = b.forward(&x);
        assert!(ya.iter().zip(&yb).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn param_count_is_constant_across_clones_and_shapes_compose() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = MlpParams::new(&[5, 7, 7, 2], &mut rng);
        assert_eq!(p.param_count(), 5 * 7 + 7 + 7 * 7 + 7 + 7 * 2 + 2);
        for win in p.layers().windows(2) {
            assert_eq!(win[1].w.cols(), win[0].w.rows());
        }
    }
}
