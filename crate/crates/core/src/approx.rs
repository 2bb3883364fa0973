//! Multilayer perceptrons with CReLU activations, reverse-mode gradients,
//! and Adam optimization.
//!
//! All arithmetic is `f64`. Networks are plain values: forward passes are
//! pure functions of `(params, input)` and bit-reproducible. Hidden layers
//! use CReLU, which concatenates the positive and negative parts of the
//! pre-activation and therefore doubles the width fed into the next layer;
//! the output layer is affine.
//!
//! Batches are flattened row-major (`batch × dim`) to keep the inner loops
//! contiguous.

use rand::Rng;

/// Adam defaults; the hyperparameter tables name the optimizer only.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Concatenated ReLU: `[max(0, x), max(0, -x)]`, doubling the width.
pub fn crelu(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * x.len()];
    crelu_into(x, &mut out);
    out
}

#[inline]
fn crelu_into(x: &[f64], out: &mut [f64]) {
    let d = x.len();
    debug_assert_eq!(out.len(), 2 * d);
    for (i, &v) in x.iter().enumerate() {
        out[i] = if v > 0.0 { v } else { 0.0 };
        out[d + i] = if v < 0.0 { -v } else { 0.0 };
    }
}

/// One affine layer, weights row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Uniform init in `±1/sqrt(fan_in)` for weights and biases.
    fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in &mut layer.w {
            *w = rng.random_range(-bound..bound);
        }
        for b in &mut layer.b {
            *b = rng.random_range(-bound..bound);
        }
        layer
    }

    /// `out[b] = W x[b] + bias`, batch rows flattened.
    fn forward_batch(&self, xs: &[f64], n: usize, out: &mut [f64]) {
        debug_assert_eq!(xs.len(), n * self.in_dim);
        debug_assert_eq!(out.len(), n * self.out_dim);
        for bi in 0..n {
            let x = &xs[bi * self.in_dim..(bi + 1) * self.in_dim];
            let o = &mut out[bi * self.out_dim..(bi + 1) * self.out_dim];
            for (oi, ov) in o.iter_mut().enumerate() {
                let row = &self.w[oi * self.in_dim..(oi + 1) * self.in_dim];
                let mut acc = self.b[oi];
                for (wv, xv) in row.iter().zip(x.iter()) {
                    acc += wv * xv;
                }
                *ov = acc;
            }
        }
    }
}

/// An MLP: affine layers with CReLU between them, identity at the output.
///
/// For hidden sizes `[h0, h1]` and input width `d`, the layer shapes are
/// `d -> h0`, `2*h0 -> h1`, `2*h1 -> out`.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        assert!(input_dim > 0 && output_dim > 0);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut in_dim = input_dim;
        for &h in hidden {
            assert!(h > 0);
            layers.push(Linear::init(in_dim, h, rng));
            in_dim = 2 * h; // CReLU doubles the width
        }
        layers.push(Linear::init(in_dim, output_dim, rng));
        Self { layers }
    }

    /// All-zero parameters with the same shape rules as [`Mlp::new`].
    pub fn zeros(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut in_dim = input_dim;
        for &h in hidden {
            layers.push(Linear::zeros(in_dim, h));
            in_dim = 2 * h;
        }
        layers.push(Linear::zeros(in_dim, output_dim));
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass for one input row.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let cache = self.forward_batch_cached(x, 1);
        cache.output
    }

    /// Forward pass for a flattened batch; returns `n × output_dim`.
    pub fn forward_batch(&self, xs: &[f64], n: usize) -> Vec<f64> {
        self.forward_batch_cached(xs, n).output
    }

    /// Forward pass keeping per-layer inputs for [`Mlp::backward_batch`].
    pub fn forward_batch_cached(&self, xs: &[f64], n: usize) -> BatchCache {
        assert_eq!(
            xs.len(),
            n * self.input_dim(),
            "input width {} does not match first layer ({})",
            xs.len() / n.max(1),
            self.input_dim()
        );
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        inputs.push(xs.to_vec());
        let mut output = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            let x = inputs.last().unwrap();
            let mut z = vec![0.0; n * layer.out_dim];
            layer.forward_batch(x, n, &mut z);
            if li == last {
                output = z;
            } else {
                let mut act = vec![0.0; 2 * z.len()];
                for bi in 0..n {
                    crelu_into(
                        &z[bi * layer.out_dim..(bi + 1) * layer.out_dim],
                        &mut act[bi * 2 * layer.out_dim..(bi + 1) * 2 * layer.out_dim],
                    );
                }
                inputs.push(act);
            }
        }
        BatchCache { inputs, output, n }
    }

    /// Reverse accumulation from `d_output` (`n × output_dim`, already
    /// scaled by the caller, e.g. by `1/n` for a mean loss) down to
    /// parameter gradients.
    pub fn backward_batch(&self, cache: &BatchCache, d_output: &[f64]) -> MlpGrads {
        self.backward_impl(cache, d_output, true, false).0
    }

    /// Reverse accumulation producing only the gradient with respect to the
    /// network input (`n × input_dim`); parameter gradients are skipped.
    /// Used where a network is held fixed but its input carries gradient.
    pub fn backward_batch_input(&self, cache: &BatchCache, d_output: &[f64]) -> Vec<f64> {
        self.backward_impl(cache, d_output, false, true).1
    }

    fn backward_impl(
        &self,
        cache: &BatchCache,
        d_output: &[f64],
        want_params: bool,
        want_input: bool,
    ) -> (MlpGrads, Vec<f64>) {
        let n = cache.n;
        debug_assert_eq!(d_output.len(), n * self.output_dim());
        let mut grads = if want_params {
            MlpGrads::zeros_like(self)
        } else {
            MlpGrads { layers: Vec::new() }
        };
        let mut d_cur = d_output.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = &cache.inputs[li];
            if want_params {
                let g = &mut grads.layers[li];
                for bi in 0..n {
                    let dz = &d_cur[bi * layer.out_dim..(bi + 1) * layer.out_dim];
                    let xr = &x[bi * layer.in_dim..(bi + 1) * layer.in_dim];
                    for (oi, &dzv) in dz.iter().enumerate() {
                        if dzv == 0.0 {
                            continue;
                        }
                        g.b[oi] += dzv;
                        let wrow = &mut g.w[oi * layer.in_dim..(oi + 1) * layer.in_dim];
                        for (gw, &xv) in wrow.iter_mut().zip(xr.iter()) {
                            *gw += dzv * xv;
                        }
                    }
                }
            }
            let need_dx = li > 0 || want_input;
            if !need_dx {
                break;
            }
            // d_x = W^T d_z, per row.
            let mut d_x = vec![0.0; n * layer.in_dim];
            for bi in 0..n {
                let dz = &d_cur[bi * layer.out_dim..(bi + 1) * layer.out_dim];
                let dxr = &mut d_x[bi * layer.in_dim..(bi + 1) * layer.in_dim];
                for (oi, &dzv) in dz.iter().enumerate() {
                    if dzv == 0.0 {
                        continue;
                    }
                    let wrow = &self.w_row(li, oi);
                    for (dxv, &wv) in dxr.iter_mut().zip(wrow.iter()) {
                        *dxv += dzv * wv;
                    }
                }
            }
            if li == 0 {
                d_cur = d_x;
                break;
            }
            // Collapse the CReLU expansion: the input of layer `li` is
            // [max(0,z), max(0,-z)] of the previous layer's pre-activation.
            // Masks come from the stored activation itself; both halves are
            // zero exactly at the kink, so the subgradient there is 0.
            let prev_out = self.layers[li - 1].out_dim;
            let act = &cache.inputs[li];
            let mut d_z = vec![0.0; n * prev_out];
            for bi in 0..n {
                let a = &act[bi * 2 * prev_out..(bi + 1) * 2 * prev_out];
                let dx = &d_x[bi * 2 * prev_out..(bi + 1) * 2 * prev_out];
                let dzr = &mut d_z[bi * prev_out..(bi + 1) * prev_out];
                for j in 0..prev_out {
                    let mut v = 0.0;
                    if a[j] > 0.0 {
                        v += dx[j];
                    }
                    if a[prev_out + j] > 0.0 {
                        v -= dx[prev_out + j];
                    }
                    dzr[j] = v;
                }
            }
            d_cur = d_z;
        }
        let d_input = if want_input { d_cur } else { Vec::new() };
        (grads, d_input)
    }

    #[inline]
    fn w_row(&self, li: usize, oi: usize) -> &[f64] {
        let layer = &self.layers[li];
        &layer.w[oi * layer.in_dim..(oi + 1) * layer.in_dim]
    }

    /// True if every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

/// Layer inputs recorded during a cached forward pass.
pub struct BatchCache {
    /// `inputs[l]` is the flattened input of layer `l` (the raw input for
    /// `l = 0`, the CReLU image of the previous pre-activation otherwise).
    pub inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
    pub n: usize,
}

/// Per-parameter partial derivatives, same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LinearGrads>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LinearGrads {
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

/// Adam moment accumulators for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: MlpGrads,
    v: MlpGrads,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        Self {
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One Adam step with bias correction; increments the step counter.
pub fn adam_step(params: &mut Mlp, grads: &MlpGrads, state: &mut AdamState, lr: f64) {
    assert!(lr > 0.0, "learning rate must be positive");
    assert_eq!(params.layers.len(), grads.layers.len());
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (li, layer) in params.layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let m = &mut state.m.layers[li];
        let v = &mut state.v.layers[li];
        adam_update_slice(&mut layer.w, &g.w, &mut m.w, &mut v.w, (b1, b2, eps), lr, bc1, bc2);
        adam_update_slice(&mut layer.b, &g.b, &mut m.b, &mut v.b, (b1, b2, eps), lr, bc1, bc2);
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn adam_update_slice(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (b1, b2, eps): (f64, f64, f64),
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let mh = m[i] / bc1;
        let vh = v[i] / bc2;
        p[i] -= lr * mh / (vh.sqrt() + eps);
    }
}
