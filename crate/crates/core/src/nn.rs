//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! A network is an ordered list of affine layers `z = A y + b`. Every hidden
//! layer applies the element-wise activation; the last layer is linear, so a
//! tower can emit unbounded embeddings.
//!
//! Weights are stored row-major with shape `(rows, cols) = (out, in)`.
//! Batched routines take flat row-major buffers of shape `(batch, width)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MLP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative evaluated at the pre-activation `z`. ReLU uses 0 at `z == 0`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::param(format!("unknown activation `{other}`"))),
        }
    }
}

/// Element-wise activation of a whole vector.
pub fn activations(kind: Activation, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| kind.apply(v)).collect()
}

/// One affine layer. `weights` is row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LayerParams {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("layer shape {rows}x{cols} has a zero side")));
        }
        if weights.len() != rows * cols {
            return Err(Error::dim(format!(
                "layer {rows}x{cols} expects {} weights, got {}",
                rows * cols,
                weights.len()
            )));
        }
        if bias.len() != rows {
            return Err(Error::dim(format!(
                "weights have {rows} rows but bias has length {}",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invariant("finite_params", "layer contains NaN or Inf"));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// Builds a layer from nested rows, mostly for tests and small examples.
    pub fn from_rows(weights: &[&[f64]], bias: &[f64]) -> Result<Self> {
        let rows = weights.len();
        let cols = weights.first().map_or(0, |r| r.len());
        if weights.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged weight rows"));
        }
        Self::new(rows, cols, weights.concat(), bias.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// All parameters, weights first then bias.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn fill_zero(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

/// Architecture statistics of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchStats {
    /// Number of layers.
    pub depth: usize,
    /// Nonzero weights and biases across all layers.
    pub effective_params: usize,
    /// Largest absolute parameter.
    pub param_scale: f64,
    /// Interval bound on `max_j |f_j(x)|` over the unit cube `[0,1]^D`.
    pub output_bound: f64,
}

/// Feed-forward network with a shared hidden activation and a linear last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerParams>,
    activation: Activation,
}

/// Per-layer gradients, shaped exactly like the network's layers.
pub type Gradients = Vec<LayerParams>;

impl Mlp {
    pub fn new(layers: Vec<LayerParams>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invariant("nonempty_layers", "network needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::dim(format!(
                    "layer {} has {} inputs but layer {} emits {}",
                    l + 2,
                    pair[1].cols,
                    l + 1,
                    pair[0].rows
                )));
            }
        }
        Ok(Self { layers, activation })
    }

    /// Glorot-uniform weights, zero biases. `widths` lists input width first.
    pub fn glorot<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::param("need an input width and at least one layer width"));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::param("layer widths must be positive"));
            }
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            layers.push(LayerParams::new(fan_out, fan_in, weights, vec![0.0; fan_out])?);
        }
        Self::new(layers, activation)
    }

    /// Every parameter drawn uniformly from `[-scale, scale]`.
    pub fn uniform<R: Rng + ?Sized>(widths: &[usize], activation: Activation, scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::glorot(widths, activation, rng)?;
        for layer in &mut net.layers {
            for p in layer.params_mut() {
                *p = if scale > 0.0 {
                    rng.random_range(-scale..=scale)
                } else {
                    0.0
                };
            }
        }
        Ok(net)
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    #[inline]
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    /// Widths including the input: `[p_0, p_1, ..., p_L]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::param_count).sum()
    }

    /// Flattened parameters in layer order (weights then bias per layer).
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(LayerParams::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(LayerParams::params_mut)
    }

    /// Multiplies every parameter by `c`.
    pub fn scale_params(&mut self, c: f64) {
        self.params_mut().for_each(|p| *p *= c);
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.layers.iter().map(|l| LayerParams::zeros(l.rows, l.cols)).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "input has length {} but the network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(self.forward_batch(x, 1).output().to_vec())
    }

    /// Gradient of `<upstream, f(x)>` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "input has length {} but the network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::dim(format!(
                "upstream has length {} but the network emits {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let trace = self.forward_batch(x, 1);
        let mut grads = self.zero_gradients();
        self.backward_batch(&trace, upstream, &mut grads);
        Ok(grads)
    }

    /// Forward pass over `batch` rows of `x` (row-major `batch x input_dim`).
    ///
    /// Panics if `x.len() != batch * input_dim`.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> BatchTrace {
        assert_eq!(x.len(), batch * self.input_dim(), "batch input shape");
        let depth = self.layers.len();
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(depth);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(depth);
        let mut current = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; batch * layer.rows];
            for row in z.chunks_exact_mut(layer.rows) {
                row.copy_from_slice(&layer.bias);
            }
            gemm_xwt(&current, batch, layer, &mut z);
            let next = if l + 1 < depth {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
        }
        BatchTrace {
            batch,
            inputs,
            pre,
            output: current,
        }
    }

    /// Accumulates into `grads` the gradient of `sum_b <upstream_b, f(x_b)>`.
    ///
    /// Panics on shape mismatch.
    pub fn backward_batch(&self, trace: &BatchTrace, upstream: &[f64], grads: &mut Gradients) {
        let batch = trace.batch;
        assert_eq!(upstream.len(), batch * self.output_dim(), "upstream shape");
        assert_eq!(grads.len(), self.layers.len(), "gradient layer count");
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let grad = &mut grads[l];
            let input = &trace.inputs[l];
            // dW += delta^T * input
            unsafe {
                matrixmultiply::dgemm(
                    layer.rows,
                    batch,
                    layer.cols,
                    1.0,
                    delta.as_ptr(),
                    1,
                    layer.rows as isize,
                    input.as_ptr(),
                    layer.cols as isize,
                    1,
                    1.0,
                    grad.weights.as_mut_ptr(),
                    layer.cols as isize,
                    1,
                );
            }
            for row in delta.chunks_exact(layer.rows) {
                for (g, d) in grad.bias.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; batch * layer.cols];
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    layer.rows,
                    layer.cols,
                    1.0,
                    delta.as_ptr(),
                    layer.rows as isize,
                    1,
                    layer.weights.as_ptr(),
                    layer.cols as isize,
                    1,
                    0.0,
                    prev.as_mut_ptr(),
                    layer.cols as isize,
                    1,
                );
            }
            for (p, &z) in prev.iter_mut().zip(&trace.pre[l - 1]) {
                *p *= self.activation.derivative(z);
            }
            delta = prev;
        }
    }

    pub fn arch_stats(&self) -> ArchStats {
        let effective_params = self.params().filter(|&&p| p != 0.0).count();
        let param_scale = self.params().fold(0.0f64, |m, p| m.max(p.abs()));
        ArchStats {
            depth: self.depth(),
            effective_params,
            param_scale,
            output_bound: self.unit_cube_output_bound(),
        }
    }

    /// Interval propagation of the box `[0,1]^D` through the network.
    fn unit_cube_output_bound(&self) -> f64 {
        let mut lo = vec![0.0; self.input_dim()];
        let mut hi = vec![1.0; self.input_dim()];
        let depth = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut nlo = layer.bias.clone();
            let mut nhi = layer.bias.clone();
            for r in 0..layer.rows {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                for ((&w, &a), &b) in row.iter().zip(&lo).zip(&hi) {
                    if w >= 0.0 {
                        nlo[r] += w * a;
                        nhi[r] += w * b;
                    } else {
                        nlo[r] += w * b;
                        nhi[r] += w * a;
                    }
                }
            }
            if l + 1 < depth {
                // both activations are monotone non-decreasing
                nlo.iter_mut().for_each(|v| *v = self.activation.apply(*v));
                nhi.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            lo = nlo;
            hi = nhi;
        }
        lo.iter().zip(&hi).fold(0.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()))
    }

    pub fn to_document(&self) -> MlpDocument {
        MlpDocument {
            format_version: MLP_FORMAT_VERSION,
            activation: self.activation,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDocument {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: MlpDocument) -> Result<Self> {
        if doc.format_version != MLP_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported network format_version {} (expected {MLP_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| LayerParams::new(l.rows, l.cols, l.weights, l.bias))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, doc.activation)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

/// Cached activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    batch: usize,
    /// Input to each layer, `batch x cols`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer, `batch x rows`.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl BatchTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network outputs, row-major `batch x output_dim`.
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// `z += x * W^T` with `x: batch x cols`, `W: rows x cols`, `z: batch x rows`.
fn gemm_xwt(x: &[f64], batch: usize, layer: &LayerParams, z: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(
            batch,
            layer.cols,
            layer.rows,
            1.0,
            x.as_ptr(),
            layer.cols as isize,
            1,
            layer.weights.as_ptr(),
            1,
            layer.cols as isize,
            1.0,
            z.as_mut_ptr(),
            layer.rows as isize,
            1,
        );
    }
}

/// Clears a gradient buffer in place.
pub fn clear_gradients(grads: &mut Gradients) {
    grads.iter_mut().for_each(LayerParams::fill_zero);
}

/// Result of comparing `backward` against central finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub entries: usize,
    /// Entries whose probe moved a ReLU pre-activation across 0.
    pub skipped: usize,
    pub failures: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks every entry of `backward(x, upstream)` against the central
/// difference of `<upstream, f(x)>` with step `step`. An entry fails when its
/// absolute error exceeds `abs_tol` and its error relative to the larger of
/// the two magnitudes exceeds `rel_tol`.
pub fn gradient_check(
    net: &Mlp,
    x: &[f64],
    upstream: &[f64],
    step: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<GradCheck> {
    let grads = net.backward(x, upstream)?;
    let probe = |n: &Mlp| -> (f64, Vec<bool>) {
        let trace = n.forward_batch(x, 1);
        let value = crate::twotower::dot(trace.output(), upstream);
        let hidden = trace.pre.len() - 1;
        let pattern = trace.pre[..hidden].iter().flatten().map(|&z| z > 0.0).collect();
        (value, pattern)
    };
    let relu = net.activation == Activation::Relu;
    let (_, base_pattern) = probe(net);
    let mut out = GradCheck {
        entries: 0,
        skipped: 0,
        failures: 0,
        max_abs_err: 0.0,
        max_rel_err: 0.0,
    };
    let mut work = net.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        let n_w = layer.weights.len();
        for k in 0..n_w + layer.bias.len() {
            let (orig, analytic) = if k < n_w {
                (layer.weights[k], grads[l].weights[k])
            } else {
                (layer.bias[k - n_w], grads[l].bias[k - n_w])
            };
            let set = |m: &mut Mlp, v: f64| {
                let t = &mut m.layers[l];
                if k < n_w {
                    t.weights[k] = v;
                } else {
                    t.bias[k - n_w] = v;
                }
            };
            set(&mut work, orig + step);
            let (plus, p_plus) = probe(&work);
            set(&mut work, orig - step);
            let (minus, p_minus) = probe(&work);
            set(&mut work, orig);
            out.entries += 1;
            if relu && (p_plus != base_pattern || p_minus != base_pattern) {
                out.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            let abs = (analytic - numeric).abs();
            let scale = analytic.abs().max(numeric.abs());
            let rel = if scale > 0.0 { abs / scale } else { 0.0 };
            out.max_abs_err = out.max_abs_err.max(abs);
            if abs > abs_tol {
                out.max_rel_err = out.max_rel_err.max(rel);
                if rel > rel_tol {
                    out.failures += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Serialized form of an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDocument {
    pub format_version: u32,
    pub activation: Activation,
    pub layers: Vec<LayerDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity2() -> LayerParams {
        LayerParams::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn single_linear_layer_passes_input_through() {
        let net = Mlp::new(vec![identity2()], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn relu_hidden_then_sum() {
        let out = LayerParams::from_rows(&[&[1.0, 1.0]], &[0.0]).unwrap();
        let net = Mlp::new(vec![identity2(), out], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[1.0, -1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LayerParams::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(LayerParams::new(2, 2, vec![0.0; 4], vec![0.0; 3]).is_err());
        assert!(LayerParams::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
        assert!(Mlp::new(vec![], Activation::Relu).is_err());
        let a = LayerParams::zeros(3, 2);
        let b = LayerParams::zeros(1, 2);
        assert!(Mlp::new(vec![a, b], Activation::Relu).is_err());

        let net = Mlp::new(vec![identity2()], Activation::Relu).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.backward(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::glorot(&[4, 6, 3], Activation::Relu, &mut rng).unwrap();
        let grads = net.backward(&[0.1, 0.2, 0.3, 0.4], &[0.0; 3]).unwrap();
        assert!(grads.iter().flat_map(|g| g.params()).all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_input() {
        let layer = LayerParams::from_rows(&[&[0.5, -1.0, 2.0], &[1.5, 0.0, -0.5]], &[0.1, 0.2]).unwrap();
        let net = Mlp::new(vec![layer], Activation::Sigmoid).unwrap();
        let x = [0.3, -0.7, 1.1];
        let g = net.backward(&x, &[1.0, 0.0]).unwrap();
        assert_eq!(&g[0].weights()[0..3], &x);
        assert_eq!(&g[0].weights()[3..6], &[0.0; 3]);
        assert_eq!(g[0].bias(), &[1.0, 0.0]);
    }

    #[test]
    fn gradient_check_accepts_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::glorot(&[4, 6, 5, 3], Activation::Sigmoid, &mut rng).unwrap();
        let x = [0.2, -0.4, 0.9, 0.1];
        let up = [1.0, -0.5, 0.25];
        let ok = gradient_check(&net, &x, &up, 1e-5, 1e-5, 1e-8).unwrap();
        assert!(ok.passed(), "{ok:?}");
        assert_eq!(ok.entries, net.param_count());
        assert_eq!(ok.skipped, 0);
    }

    #[test]
    fn arch_stats_counts_and_scale() {
        let zero = Mlp::new(vec![LayerParams::zeros(2, 2)], Activation::Relu).unwrap();
        let s = zero.arch_stats();
        assert_eq!((s.depth, s.effective_params, s.param_scale), (1, 0, 0.0));

        let layer = LayerParams::from_rows(&[&[2.0, 0.0], &[0.0, -3.0]], &[0.0, 1.0]).unwrap();
        let net = Mlp::new(vec![layer], Activation::Relu).unwrap();
        let s = net.arch_stats();
        assert_eq!(s.effective_params, 3);
        assert_eq!(s.param_scale, 3.0);
        // x in [0,1]^2: row 1 in [0,2], row 2 in [-2,1]
        assert_eq!(s.output_bound, 2.0);
    }

    #[test]
    fn activation_values() {
        assert_eq!(activations(Activation::Relu, &[-2.0, 0.0, 3.0]), vec![0.0, 0.0, 3.0]);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert!((Activation::Sigmoid.apply(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::glorot(&[5, 7, 7, 2], Activation::Sigmoid, &mut rng).unwrap();
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn rejects_unknown_format_version() {
        let mut doc = Mlp::new(vec![identity2()], Activation::Relu).unwrap().to_document();
        doc.format_version = 99;
        assert!(matches!(Mlp::from_document(doc), Err(Error::Format(_))));
    }
}
