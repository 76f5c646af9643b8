//! Embedding of a small ReLU network into the uniform-width class.
//!
//! A network `f` with depth `U <= L`, at most `W` nonzero parameters and
//! output width `p` is rewritten as an `L`-layer network `Q(f)` whose hidden
//! layers all have width `2W` and which computes the same function:
//!
//! * layers `1..U-1` are zero-padded to width `2W`;
//! * if `U = L` the last layer is `(A_L, 0)`;
//! * otherwise layer `U` emits `(σ(y), σ(-y))` for its affine output `y`,
//!   layers `U+1..L-1` map `(a, b)` to `(σ(a - b), σ(b - a))` and the last
//!   layer returns `a - b`, which equals `y` because `σ(y) - σ(-y) = y`.

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerParams, Mlp};

/// `Q(net)` with depth `target_depth` and hidden width `2 * width_cap`.
pub fn embed_network(net: &Mlp, target_depth: usize, width_cap: usize) -> Result<Mlp> {
    if net.activation() != Activation::Relu {
        return Err(Error::param("the embedding needs ReLU activations"));
    }
    let depth = net.depth();
    if depth > target_depth {
        return Err(Error::param(format!(
            "network depth {depth} exceeds the target depth {target_depth}"
        )));
    }
    let z = net.arch_stats().effective_params;
    if z > width_cap {
        return Err(Error::param(format!(
            "network has {z} nonzero parameters, more than the cap W = {width_cap}"
        )));
    }
    let wide = 2 * width_cap;
    let widths = net.widths();
    let p = net.output_dim();
    if widths[1..widths.len() - 1].iter().any(|&w| w > wide) {
        return Err(Error::param(format!("a hidden width exceeds 2W = {wide}")));
    }
    if target_depth == 1 {
        return Ok(net.clone());
    }
    if depth < target_depth && p > width_cap {
        return Err(Error::param(format!(
            "output width {p} does not fit twice into 2W = {wide}"
        )));
    }

    let src = net.layers();
    let mut out = Vec::with_capacity(target_depth);
    for layer in &src[..depth - 1] {
        out.push(pad(layer, wide, in_width(out.len(), net.input_dim(), wide)));
    }
    let last = &src[depth - 1];
    let last_in = in_width(depth - 1, net.input_dim(), wide);
    if depth == target_depth {
        out.push(pad(last, p, last_in));
        return Mlp::new(out, Activation::Relu);
    }

    let mut split = LayerParams::zeros(wide, last_in);
    for r in 0..p {
        for c in 0..last.cols() {
            let w = last.weight(r, c);
            split.weights_mut()[r * last_in + c] = w;
            split.weights_mut()[(r + p) * last_in + c] = -w;
        }
        split.bias_mut()[r] = last.bias()[r];
        split.bias_mut()[r + p] = -last.bias()[r];
    }
    out.push(split);
    for _ in depth + 1..target_depth {
        let mut carry = LayerParams::zeros(wide, wide);
        for r in 0..p {
            let w = carry.weights_mut();
            w[r * wide + r] = 1.0;
            w[r * wide + r + p] = -1.0;
            w[(r + p) * wide + r] = -1.0;
            w[(r + p) * wide + r + p] = 1.0;
        }
        out.push(carry);
    }
    let mut head = LayerParams::zeros(p, wide);
    for r in 0..p {
        head.weights_mut()[r * wide + r] = 1.0;
        head.weights_mut()[r * wide + r + p] = -1.0;
    }
    out.push(head);
    Mlp::new(out, Activation::Relu)
}

fn in_width(layer: usize, input_dim: usize, wide: usize) -> usize {
    if layer == 0 {
        input_dim
    } else {
        wide
    }
}

/// Copies `layer` into the top-left corner of a zero `rows x cols` layer.
fn pad(layer: &LayerParams, rows: usize, cols: usize) -> LayerParams {
    let mut out = LayerParams::zeros(rows, cols);
    for r in 0..layer.rows() {
        for c in 0..layer.cols() {
            out.weights_mut()[r * cols + c] = layer.weight(r, c);
        }
        out.bias_mut()[r] = layer.bias()[r];
    }
    out
}

/// `14 L W ln W`, the parameter budget of the embedded network.
pub fn embedding_param_budget(target_depth: usize, width_cap: usize) -> f64 {
    let w = width_cap as f64;
    14.0 * target_depth as f64 * w * w.ln()
}
