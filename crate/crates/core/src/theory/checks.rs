//! Randomized property suites over the network and theory code. Each suite
//! returns a report instead of panicking so callers can print every result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dimension::{default_scales, minkowski_dimension};
use super::embed::{embed_network, embedding_param_budget};
use super::lipschitz::{verify_lipschitz, NetFamily};
use crate::error::Result;
use crate::nn::{gradient_check, Activation, Mlp};
use crate::synthgen::{generate_covariates, Side, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Worst observed value of the suite's checked quantity.
    pub worst: f64,
    pub note: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-5;
pub const GRAD_ABS_TOL: f64 = 1e-8;

/// Backward pass of `nets` random 3- and 4-layer networks (widths up to 16,
/// alternating ReLU and sigmoid) against central finite differences.
pub fn gradient_suite(nets: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut worst, mut worst_abs, mut entries, mut skipped) = (0, 0.0f64, 0.0f64, 0, 0);
    for n in 0..nets {
        let depth = 3 + n % 2;
        let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=16)).collect();
        let act = if n % 2 == 0 {
            Activation::Relu
        } else {
            Activation::Sigmoid
        };
        let net = Mlp::uniform(&widths, act, 1.0, &mut rng)?;
        let x: Vec<f64> = (0..widths[0]).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let up: Vec<f64> = (0..widths[depth]).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let g = gradient_check(&net, &x, &up, GRAD_STEP, GRAD_REL_TOL, GRAD_ABS_TOL)?;
        violations += g.failures;
        worst = worst.max(g.max_rel_err);
        worst_abs = worst_abs.max(g.max_abs_err);
        entries += g.entries;
        skipped += g.skipped;
    }
    Ok(SuiteReport {
        name: "gradient".into(),
        cases: nets,
        violations,
        worst,
        note: format!(
            "{entries} entries, {skipped} skipped at ReLU kinks, max abs error {worst_abs:e}; \
             worst is the relative error above the absolute floor"
        ),
    })
}

pub const EMBED_TOL: f64 = 1e-10;

/// Embeds `nets` random sparse ReLU networks into depth `L = 5`, cycling
/// through `U = L`, `U = L - 1` and `U <= L - 2`, and compares outputs on
/// `inputs` random points of `[-1, 1]^D`. A case fails when the deviation
/// exceeds 1e-10 or the result has more than `14 L W ln W` nonzero parameters.
pub fn embedding_suite(nets: usize, inputs: usize, seed: u64) -> Result<SuiteReport> {
    const TARGET: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut worst) = (0, 0.0f64);
    for n in 0..nets {
        let depth = match n % 3 {
            0 => TARGET,
            1 => TARGET - 1,
            _ => rng.random_range(1..=TARGET - 2),
        };
        let mut widths = vec![rng.random_range(2..=4)];
        widths.extend((1..depth).map(|_| rng.random_range(2..=4)));
        widths.push(rng.random_range(1..=3));
        let mut net = Mlp::uniform(&widths, Activation::Relu, 1.0, &mut rng)?;
        for p in net.params_mut() {
            if rng.random_bool(0.3) {
                *p = 0.0;
            }
        }
        let z = net.arch_stats().effective_params;
        let w = z.max(net.output_dim()).max(2);
        let q = embed_network(&net, TARGET, w)?;
        let mut dev = 0.0f64;
        for _ in 0..inputs {
            let x: Vec<f64> = (0..widths[0]).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let (a, b) = (net.forward(&x)?, q.forward(&x)?);
            for (u, v) in a.iter().zip(&b) {
                dev = dev.max((u - v).abs());
            }
        }
        let budget_ok = (q.arch_stats().effective_params as f64) <= embedding_param_budget(TARGET, w);
        if dev > EMBED_TOL || !budget_ok || q.depth() != TARGET {
            violations += 1;
        }
        worst = worst.max(dev);
    }
    Ok(SuiteReport {
        name: "embedding".into(),
        cases: nets,
        violations,
        worst,
        note: "worst is the largest output deviation".into(),
    })
}

/// The `(W, L, B)` grid of the perturbation suite; every entry has `WB > 1`.
pub fn lipschitz_grid() -> Vec<(usize, usize, f64)> {
    let mut grid = Vec::new();
    for w in [2, 4, 8] {
        for l in [1, 2, 3] {
            for b in [0.5, 1.0, 2.0] {
                if w as f64 * b > 1.0 {
                    grid.push((w, l, b));
                }
            }
        }
    }
    grid
}

/// [`verify_lipschitz`] with `trials` draws per grid entry at `eps = 0.01`
/// and output width 2. Worst is the largest observed ratio to the bound.
pub fn lipschitz_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let grid = lipschitz_grid();
    let (mut violations, mut worst) = (0, 0.0f64);
    for (k, &(w, l, b)) in grid.iter().enumerate() {
        let r = verify_lipschitz(&NetFamily::square(w, l, b, 2), 0.01, trials, seed + k as u64)?;
        violations += r.violations;
        worst = worst.max(r.max_ratio);
    }
    Ok(SuiteReport {
        name: "lipschitz".into(),
        cases: grid.len() * trials,
        violations,
        worst,
        note: format!("{} (W, L, B) configurations", grid.len()),
    })
}

/// Box-counting estimates on reference clouds: a line segment in the plane
/// (must land in `[0.9, 1.1]`), a repeated point (exactly 0), and a 3-d
/// cloud before and after a coordinate permutation and after appending
/// duplicated coordinates (each within 0.1 of the original estimate).
pub fn dimension_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = default_scales();
    let n = 10_000;
    let mut line = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let t: f64 = rng.random();
        line.extend([t, 0.3 + 0.4 * t]);
    }
    let line_dim = minkowski_dimension(&line, 2, &scales)?;
    let point_dim = minkowski_dimension(&[0.25, 0.75].repeat(n), 2, &scales)?;

    let cloud: Vec<f64> = (0..3 * n).map(|_| rng.random()).collect();
    let permuted: Vec<f64> = cloud.chunks_exact(3).flat_map(|c| [c[2], c[0], c[1]]).collect();
    let padded: Vec<f64> = cloud
        .chunks_exact(3)
        .flat_map(|c| [c[0], c[1], c[2], c[0], c[1]])
        .collect();
    let base = minkowski_dimension(&cloud, 3, &scales)?;
    let perm = minkowski_dimension(&permuted, 3, &scales)?;
    let pad = minkowski_dimension(&padded, 5, &scales)?;

    let checks = [
        (0.9..=1.1).contains(&line_dim),
        point_dim == 0.0,
        (perm - base).abs() <= 0.1,
        (pad - base).abs() <= 0.1,
    ];
    Ok(SuiteReport {
        name: "dimension".into(),
        cases: checks.len(),
        violations: checks.iter().filter(|ok| !**ok).count(),
        worst: (line_dim - 1.0).abs(),
        note: format!("line {line_dim:.4}, point {point_dim}, cloud {base:.4}, permuted {perm:.4}, padded {pad:.4}"),
    })
}

/// Box-counting estimate of `rows` generated user covariates.
pub fn covariate_dimension(spec: &SyntheticSpec, rows: usize) -> Result<f64> {
    let table = generate_covariates(spec, rows, Side::User)?;
    minkowski_dimension(table.as_slice(), table.dim(), &default_scales())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(gradient_suite(6, 1).unwrap().passed());
        assert!(embedding_suite(6, 50, 2).unwrap().passed());
        let l = lipschitz_suite(20, 3).unwrap();
        assert!(l.passed() && l.worst <= 1.0, "{l:?}");
        assert_eq!(lipschitz_grid().len(), 24);
    }

    #[test]
    fn dimension_suite_passes() {
        let r = dimension_suite(4).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
