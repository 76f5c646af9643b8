use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineSettings};
use crate::error::{Error, Result};
use crate::synthgen::SyntheticSpec;
use crate::twotower::{TrainConfig, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};

/// A method compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    T2rec,
    Rsvd,
    Svdpp,
    Cocluster,
    Knn,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::T2rec,
        Method::Rsvd,
        Method::Svdpp,
        Method::Cocluster,
        Method::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::T2rec => "t2rec",
            Method::Rsvd => "rsvd",
            Method::Svdpp => "svdpp",
            Method::Cocluster => "cocluster",
            Method::Knn => "knn",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::T2rec => None,
            Method::Rsvd => Some(BaselineKind::Rsvd),
            Method::Svdpp => Some(BaselineKind::SvdPp),
            Method::Cocluster => Some(BaselineKind::CoCluster),
            Method::Knn => Some(BaselineKind::Knn),
        }
    }
}

/// `10^{-6 + k/3}` for `k = 0..=24`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=24).map(|k| 10f64.powf(-6.0 + f64::from(k) / 3.0)).collect()
}

/// `5, 10, ..., 50`.
pub fn default_k_grid() -> Vec<usize> {
    (1..=10).map(|k| 5 * k).collect()
}

/// Matrix size and intrinsic dimension of one experimental cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_users: usize,
    pub n_items: usize,
    pub d: usize,
}

/// Tower architecture and training settings for the two-tower model. The
/// `lambda` and `seed` of `train` are replaced per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct T2recSettings {
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub train: TrainConfig,
}

impl Default for T2recSettings {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            embed_dim: DEFAULT_EMBED_DIM,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: SyntheticSpec,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Penalty grid of the two-tower model and rSVD.
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    /// Regularization grid of SVD++; the penalty grid when absent.
    #[serde(default)]
    pub svdpp_reg_grid: Option<Vec<f64>>,
    /// Cluster counts and neighbourhood sizes.
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Cells to run; the spec's own size and `d` when empty.
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub t2rec: T2recSettings,
    #[serde(default)]
    pub baselines: BaselineSettings,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_replications() -> usize {
    10
}

fn default_split() -> f64 {
    0.7
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_folds() -> usize {
    5
}

impl ExperimentConfig {
    /// Desk-scale defaults around `spec` with the full grids.
    pub fn new(spec: SyntheticSpec) -> Self {
        Self {
            spec,
            methods: all_methods(),
            replications: default_replications(),
            split_ratio: default_split(),
            val_fraction: default_val_fraction(),
            lambda_grid: default_lambda_grid(),
            svdpp_reg_grid: None,
            k_grid: default_k_grid(),
            folds: default_folds(),
            base_seed: 0,
            scenarios: Vec::new(),
            t2rec: T2recSettings::default(),
            baselines: BaselineSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let check = |cond: bool, name: &'static str, detail: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::invariant(name, detail.to_string()))
            }
        };
        check(
            self.split_ratio > 0.0 && self.split_ratio < 1.0,
            "split_ratio_range",
            "need 0 < split_ratio < 1",
        )?;
        check(
            self.val_fraction > 0.0 && self.val_fraction < 1.0,
            "val_fraction_range",
            "need 0 < val_fraction < 1",
        )?;
        check(!self.methods.is_empty(), "methods_nonempty", "no methods requested")?;
        check(
            self.replications >= 1,
            "replications_positive",
            "replications must be >= 1",
        )?;
        check(!self.lambda_grid.is_empty(), "grids_nonempty", "lambda_grid is empty")?;
        check(!self.k_grid.is_empty(), "grids_nonempty", "k_grid is empty")?;
        check(
            self.svdpp_reg_grid.as_ref().is_none_or(|g| !g.is_empty()),
            "grids_nonempty",
            "svdpp_reg_grid is empty",
        )?;
        check(
            self.lambda_grid
                .iter()
                .chain(self.svdpp_reg_grid.iter().flatten())
                .all(|v| *v >= 0.0 && v.is_finite()),
            "grid_values",
            "regularization grids need finite values >= 0",
        )?;
        check(
            self.k_grid.iter().all(|&k| k >= 1),
            "grid_values",
            "k_grid values must be >= 1",
        )?;
        check(self.folds >= 2, "folds_range", "need at least 2 folds")?;
        self.t2rec.train.validate()?;
        for s in self.scenarios() {
            self.spec_for(s).validate()?;
        }
        Ok(())
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        if self.scenarios.is_empty() {
            vec![Scenario {
                n_users: self.spec.n_users,
                n_items: self.spec.n_items,
                d: self.spec.intrinsic_dim,
            }]
        } else {
            self.scenarios.clone()
        }
    }

    /// The generator spec of `scenario` for one replication seed.
    pub fn spec_for(&self, scenario: Scenario) -> SyntheticSpec {
        SyntheticSpec {
            n_users: scenario.n_users,
            n_items: scenario.n_items,
            intrinsic_dim: scenario.d,
            ..self.spec.clone()
        }
    }

    pub fn svdpp_grid(&self) -> &[f64] {
        self.svdpp_reg_grid.as_deref().unwrap_or(&self.lambda_grid)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Fixed offsets added to the replication seed `base_seed + r`.
pub mod seed_offsets {
    pub const DATA: u64 = 0;
    pub const SPLIT: u64 = 1_000;
    pub const VALIDATION: u64 = 2_000;
    pub const INIT: u64 = 3_000;
    pub const TRAIN: u64 = 4_000;
    pub const FOLDS: u64 = 5_000;
    pub const BASELINE: u64 = 6_000;
}
