//! Empirical convergence-rate probe: excess test MSE of the two-tower model
//! as the number of observed ratings grows, for several intrinsic dimensions.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dimension::ols_slope;
use crate::data::format_f64;
use crate::error::{Error, Result};
use crate::harness::{evaluate_rmse, split, tune_t2rec, T2recSettings};
use crate::synthgen::{generate, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    /// Sizes, widths and noise; `n_ratings`, `d` and `seed` are set per cell.
    pub spec: SyntheticSpec,
    pub d_values: Vec<usize>,
    pub omega_grid: Vec<usize>,
    pub replications: usize,
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub base_seed: u64,
    /// Mean excess MSE at or below this value counts as no signal.
    #[serde(default = "default_floor")]
    pub degenerate_floor: f64,
    #[serde(default)]
    pub t2rec: T2recSettings,
}

fn default_split() -> f64 {
    0.7
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_floor() -> f64 {
    1e-3
}

impl RateConfig {
    /// `|Ω| ∈ {2.5k, 5k, 10k, 20k}` on a 300 x 300 matrix, `d ∈ {20, 40}`.
    pub fn desk(replications: usize, lambda: f64) -> Self {
        Self {
            spec: SyntheticSpec::desk_scale(20, 0),
            d_values: vec![20, 40],
            omega_grid: vec![2_500, 5_000, 10_000, 20_000],
            replications,
            lambda_grid: vec![lambda],
            split_ratio: default_split(),
            val_fraction: default_val_fraction(),
            base_seed: 0,
            degenerate_floor: default_floor(),
            t2rec: T2recSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_grid.len() < 4 || self.omega_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invariant(
                "omega_grid_increasing",
                "need at least 4 strictly increasing sizes",
            ));
        }
        if self.d_values.is_empty() || self.replications == 0 || self.lambda_grid.is_empty() {
            return Err(Error::invariant(
                "grids_nonempty",
                "d_values, replications and lambda_grid must be nonempty",
            ));
        }
        for &d in &self.d_values {
            for &n in &self.omega_grid {
                self.cell_spec(d, n, 0).validate()?;
            }
        }
        self.t2rec.train.validate()
    }

    fn cell_spec(&self, d: usize, omega: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            intrinsic_dim: d,
            n_ratings: omega,
            seed,
            ..self.spec.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub d: usize,
    pub omega: usize,
    pub replication: usize,
    pub lambda: f64,
    pub test_mse: f64,
    /// `test_mse - σ²`.
    pub excess_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSlope {
    pub d: usize,
    /// Mean excess MSE per grid size, in grid order.
    pub mean_excess: Vec<f64>,
    /// Least-squares slope of `ln(mean excess)` on `ln |Ω|`; `None` when degenerate.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub omega_grid: Vec<usize>,
    pub cells: Vec<RateCell>,
    pub slopes: Vec<RateSlope>,
}

impl RateTable {
    pub fn slope(&self, d: usize) -> Option<f64> {
        self.slopes.iter().find(|s| s.d == d).and_then(|s| s.slope)
    }

    pub fn write_slopes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["d", "slope", "degenerate"])?;
        for s in &self.slopes {
            out.write_record([
                s.d.to_string(),
                s.slope.map(format_f64).unwrap_or_default(),
                s.slope.is_none().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_cells_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["d", "omega", "replication", "lambda", "test_mse", "excess_mse"])?;
        for c in &self.cells {
            out.write_record([
                c.d.to_string(),
                c.omega.to_string(),
                c.replication.to_string(),
                format_f64(c.lambda),
                format_f64(c.test_mse),
                format_f64(c.excess_mse),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Trains the tuned two-tower model on every `(d, |Ω|, replication)` cell and
/// fits the decay slope per `d`. Replication `r` uses seed `base_seed + r` in
/// every cell, so the cells of one replication share their ground truth.
pub fn empirical_rate_experiment(cfg: &RateConfig, jobs: usize) -> Result<RateTable> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &d in &cfg.d_values {
        for &omega in &cfg.omega_grid {
            for r in 0..cfg.replications {
                cells.push((d, omega, r));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Experiment(e.to_string()))?;
    let results: Vec<Result<RateCell>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, omega, r)| {
                run_cell(cfg, d, omega, r)
                    .map_err(|e| Error::Experiment(format!("cell d = {d}, |Omega| = {omega}, replication {r}: {e}")))
            })
            .collect()
    });
    let cells: Vec<RateCell> = results.into_iter().collect::<Result<_>>()?;

    let xs: Vec<f64> = cfg.omega_grid.iter().map(|&n| (n as f64).ln()).collect();
    let slopes = cfg
        .d_values
        .iter()
        .map(|&d| {
            let mean_excess: Vec<f64> = cfg
                .omega_grid
                .iter()
                .map(|&n| {
                    let v: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.d == d && c.omega == n)
                        .map(|c| c.excess_mse)
                        .collect();
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            let slope = if mean_excess.iter().any(|&e| e <= cfg.degenerate_floor) {
                None
            } else {
                let ys: Vec<f64> = mean_excess.iter().map(|e| e.ln()).collect();
                Some(ols_slope(&xs, &ys))
            };
            RateSlope { d, mean_excess, slope }
        })
        .collect();
    Ok(RateTable {
        omega_grid: cfg.omega_grid.clone(),
        cells,
        slopes,
    })
}

fn run_cell(cfg: &RateConfig, d: usize, omega: usize, r: usize) -> Result<RateCell> {
    let seed = cfg.base_seed + r as u64;
    let spec = cfg.cell_spec(d, omega, seed);
    let data = generate(&spec)?.observations;
    let (train_set, test_set) = split(&data, cfg.split_ratio, seed + crate::harness::seed_offsets::SPLIT)?;
    let tuned = tune_t2rec(&train_set, &cfg.lambda_grid, cfg.val_fraction, &cfg.t2rec, seed)?;
    let emb = tuned.model.model.embed(&test_set)?;
    let test_mse = evaluate_rmse(&emb, test_set.ratings())?.powi(2);
    Ok(RateCell {
        d,
        omega,
        replication: r,
        lambda: tuned.best,
        test_mse,
        excess_mse: test_mse - spec.noise_var,
    })
}
