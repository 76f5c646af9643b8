//! Closed-form bound calculators: entropy, approximation error, convergence
//! rate and the constants they depend on. Logarithms are natural.

use serde::{Deserialize, Serialize};

use super::lipschitz::lipschitz_constant;
use crate::error::{Error, Result};

/// Architecture and problem constants for the user class `(W, L, B)` and the
/// item class `(W~, L~, B~)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    #[serde(rename = "W")]
    pub width: f64,
    #[serde(rename = "L")]
    pub depth: u32,
    #[serde(rename = "B")]
    pub scale: f64,
    #[serde(rename = "W_tilde")]
    pub width_item: f64,
    #[serde(rename = "L_tilde")]
    pub depth_item: u32,
    #[serde(rename = "B_tilde")]
    pub scale_item: f64,
    pub p: usize,
    #[serde(rename = "M")]
    pub radius: f64,
    pub beta: f64,
    pub d_u: f64,
    pub d_i: f64,
    pub omega_size: u64,
    pub sigma2: f64,
    #[serde(rename = "B_e")]
    pub noise_bound: f64,
    pub lambda_omega: f64,
    #[serde(rename = "J_R0")]
    pub j_r0: f64,
    /// Resolution used for the entropy and approximation entries of a report.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    0.01
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("W", self.width),
            ("B", self.scale),
            ("W_tilde", self.width_item),
            ("B_tilde", self.scale_item),
            ("M", self.radius),
            ("beta", self.beta),
            ("d_u", self.d_u),
            ("d_i", self.d_i),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let nonneg = [
            ("sigma2", self.sigma2),
            ("B_e", self.noise_bound),
            ("lambda_omega", self.lambda_omega),
            ("J_R0", self.j_r0),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be >= 0 and finite, got {v}")));
            }
        }
        if self.depth == 0 || self.depth_item == 0 || self.p == 0 {
            return Err(Error::param("L, L_tilde and p must be >= 1"));
        }
        if self.omega_size < 2 {
            return Err(Error::param("omega_size must be >= 2"));
        }
        Ok(())
    }

    /// `d_ui = max(d_u, d_i)`.
    pub fn d_ui(&self) -> f64 {
        self.d_u.max(self.d_i)
    }

    /// `L_ui = max(L, L~)`.
    pub fn l_ui(&self) -> u32 {
        self.depth.max(self.depth_item)
    }
}

/// `C_2 = 28 max(L, L~)`.
pub fn c2(depth: u32, depth_item: u32) -> f64 {
    28.0 * f64::from(depth.max(depth_item))
}

/// `C_3 = 2 p^{3/2} M max(B, B~)`.
pub fn c3(p: usize, radius: f64, scale: f64, scale_item: f64) -> f64 {
    2.0 * (p as f64).powf(1.5) * radius * scale.max(scale_item)
}

/// `C_1 = 6 max(50 p^2 M^4 + 4 σ^2, 1) (25 p^2 M^4 + B_e^2) / 13`.
pub fn c1(p: usize, radius: f64, sigma2: f64, noise_bound: f64) -> f64 {
    let pm = (p as f64).powi(2) * radius.powi(4);
    6.0 * (50.0 * pm + 4.0 * sigma2).max(1.0) * (25.0 * pm + noise_bound.powi(2)) / 13.0
}

/// Bracketing-entropy bound
/// `C_2 (W ln W + W~ ln W~) ln(C_3 (C(W,L,B) + C(W~,L~,B~)) / ε)`.
pub fn entropy_bound(inputs: &BoundInputs, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::param("eps must be positive"));
    }
    let c = lipschitz_constant(inputs.width, inputs.depth, inputs.scale)?;
    let ct = lipschitz_constant(inputs.width_item, inputs.depth_item, inputs.scale_item)?;
    let arg = c3(inputs.p, inputs.radius, inputs.scale, inputs.scale_item) * (c + ct) / eps;
    if arg.is_nan() || arg <= 1.0 {
        return Err(Error::param(format!(
            "log argument {arg} <= 1: eps = {eps} is too large for these constants"
        )));
    }
    let w = inputs.width * inputs.width.ln() + inputs.width_item * inputs.width_item.ln();
    Ok(c2(inputs.depth, inputs.depth_item) * w * arg.ln())
}

/// Approximation error bound `3 p M ε`.
pub fn approx_bound(p: usize, radius: f64, eps: f64) -> f64 {
    3.0 * p as f64 * radius * eps
}

/// Width orders for a target approximation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSchedule {
    /// Order of `W`, `ε^{-d_u/β}`.
    pub width: f64,
    /// Order of `W~`, `ε^{-d_i/β}`.
    pub width_item: f64,
    /// Order of `B`, `ε^{-s}`, when an exponent `s` was supplied.
    pub scale: Option<f64>,
}

pub fn width_schedule(eps: f64, beta: f64, d_u: f64, d_i: f64, scale_exponent: Option<f64>) -> Result<WidthSchedule> {
    if !(eps > 0.0 && beta > 0.0) {
        return Err(Error::param("need eps > 0 and beta > 0"));
    }
    Ok(WidthSchedule {
        width: eps.powf(-d_u / beta),
        width_item: eps.powf(-d_i / beta),
        scale: scale_exponent.map(|s| eps.powf(-s)),
    })
}

/// `2β / (2β + d_ui)`.
pub fn rate_exponent(beta: f64, d_ui: f64) -> f64 {
    2.0 * beta / (2.0 * beta + d_ui)
}

/// `L_ui |Ω|^{-exponent} (ln |Ω|)^2`.
pub fn rate_value(l_ui: u32, omega: u64, exponent: f64) -> f64 {
    let n = omega as f64;
    f64::from(l_ui) * n.powf(-exponent) * n.ln().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub eps: f64,
    /// `None` when `eps` is too large for the logarithm to be positive.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lipschitz_c: f64,
    pub lipschitz_c_tilde: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Entropy bound at the input `eps` and at ten and a hundred times smaller.
    pub entropy: Vec<EntropyPoint>,
    pub eps: f64,
    pub approx_bound: f64,
    pub d_ui: f64,
    pub l_ui: u32,
    pub rate_exponent: f64,
    pub rate_value: f64,
    pub lambda_condition_holds: bool,
    /// `|Ω|^{d_ui/(2β+d_ui)} ln |Ω|`.
    pub width_order: f64,
    /// `β log2(β) / d_u`.
    pub depth_order: f64,
    pub depth_order_item: f64,
}

pub fn rate_report(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let d_ui = inputs.d_ui();
    let l_ui = inputs.l_ui();
    let exponent = rate_exponent(inputs.beta, d_ui);
    let n = inputs.omega_size as f64;
    let lambda_rhs = f64::from(l_ui) * n.powf(-exponent) * n.ln();
    let entropy = [1.0, 0.1, 0.01]
        .iter()
        .map(|f| {
            let eps = inputs.eps * f;
            EntropyPoint {
                eps,
                bound: entropy_bound(inputs, eps).ok(),
            }
        })
        .collect();
    let depth_order = |d: f64| inputs.beta * inputs.beta.log2() / d;
    Ok(BoundReport {
        lipschitz_c: lipschitz_constant(inputs.width, inputs.depth, inputs.scale)?,
        lipschitz_c_tilde: lipschitz_constant(inputs.width_item, inputs.depth_item, inputs.scale_item)?,
        c1: c1(inputs.p, inputs.radius, inputs.sigma2, inputs.noise_bound),
        c2: c2(inputs.depth, inputs.depth_item),
        c3: c3(inputs.p, inputs.radius, inputs.scale, inputs.scale_item),
        entropy,
        eps: inputs.eps,
        approx_bound: approx_bound(inputs.p, inputs.radius, inputs.eps),
        d_ui,
        l_ui,
        rate_exponent: exponent,
        rate_value: rate_value(l_ui, inputs.omega_size, exponent),
        lambda_condition_holds: 4.0 * inputs.lambda_omega * inputs.j_r0 <= lambda_rhs,
        width_order: n.powf(d_ui / (2.0 * inputs.beta + d_ui)) * n.ln(),
        depth_order: depth_order(inputs.d_u),
        depth_order_item: depth_order(inputs.d_i),
    })
}
