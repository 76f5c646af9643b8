//! Parameter-perturbation bound for bounded ReLU networks.
//!
//! For networks whose rows have at most `W` inputs and whose parameters lie
//! in `[-B, B]`, moving every parameter by at most `ε` moves the output by at
//! most `p C(W, L, B) ε` in the Euclidean norm, uniformly over `|x|_∞ <= 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

/// `C(W, L, B) = (WB)^L (L/B + L/(WB-1)) - ((WB)^L - 1)/(WB-1)^2`.
pub fn lipschitz_constant(width: f64, depth: u32, scale: f64) -> Result<f64> {
    if !(width >= 1.0 && depth >= 1 && scale > 0.0) || !width.is_finite() || !scale.is_finite() {
        return Err(Error::param(format!(
            "need W >= 1, L >= 1, B > 0; got W = {width}, L = {depth}, B = {scale}"
        )));
    }
    let wb = width * scale;
    if wb == 1.0 {
        return Err(Error::Singular("W * B = 1 makes the constant undefined".into()));
    }
    let l = f64::from(depth);
    let pow = wb.powi(depth as i32);
    Ok(pow * (l / scale + l / (wb - 1.0)) - (pow - 1.0) / (wb - 1.0).powi(2))
}

/// Random networks `D -> h -> ... -> h -> p` with `depth` layers, every
/// parameter uniform on `[-scale, scale]`. Fan-in never exceeds `width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFamily {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub depth: usize,
    /// `W`.
    pub width: usize,
    /// `B`.
    pub scale: f64,
}

impl NetFamily {
    /// Input and hidden widths both equal to `width`.
    pub fn square(width: usize, depth: usize, scale: f64, output_dim: usize) -> Self {
        Self {
            input_dim: width,
            hidden: width,
            output_dim,
            depth,
            width,
            scale,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(std::iter::repeat_n(self.hidden, self.depth - 1));
        w.push(self.output_dim);
        w
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.output_dim == 0 || self.input_dim == 0 || self.hidden == 0 {
            return Err(Error::param("network sizes must be positive"));
        }
        if self.input_dim > self.width || (self.depth > 1 && self.hidden > self.width) {
            return Err(Error::param("fan-in exceeds W"));
        }
        if self.scale.is_nan() || self.scale <= 0.0 {
            return Err(Error::param("B must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub family: NetFamily,
    pub eps: f64,
    pub trials: usize,
    /// `p C(W, L, B) ε`.
    pub bound: f64,
    pub violations: usize,
    /// Largest observed `|f(x; Θ) - f(x; Θ')|_2 / bound`.
    pub max_ratio: f64,
}

impl LipschitzReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.max_ratio <= 1.0
    }
}

/// Draws `trials` triples `(Θ, Θ', x)` with `|Θ - Θ'|_∞ <= eps`, both inside
/// the `[-B, B]` box, and `x` uniform on `[-1, 1]^D`, and compares the output
/// change with the bound.
pub fn verify_lipschitz(family: &NetFamily, eps: f64, trials: usize, seed: u64) -> Result<LipschitzReport> {
    family.validate()?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::param("eps must be positive"));
    }
    let c = lipschitz_constant(family.width as f64, family.depth as u32, family.scale)?;
    let bound = family.output_dim as f64 * c * eps;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = family.widths();
    let b = family.scale;
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let net = Mlp::uniform(&widths, Activation::Relu, b, &mut rng)?;
        let mut moved = net.clone();
        for p in moved.params_mut() {
            *p = (*p + rng.random_range(-eps..=eps)).clamp(-b, b);
        }
        let x: Vec<f64> = (0..family.input_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let (y0, y1) = (net.forward(&x)?, moved.forward(&x)?);
        let diff = y0.iter().zip(&y1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let ratio = diff / bound;
        if ratio > 1.0 {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    Ok(LipschitzReport {
        family: family.clone(),
        eps,
        trials,
        bound,
        violations,
        max_ratio,
    })
}
