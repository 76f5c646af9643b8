//! SVD++ fitted by stochastic gradient descent.
//!
//! `r̂_ui = μ + b_u + b_i + q_i · (p_u + |N(u)|^{-1/2} Σ_{j ∈ N(u)} y_j)`
//! where `N(u)` is the set of items rated by `u` in the training data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Predictor, RatingIndex};
use crate::data::Rating;
use crate::error::{Error, Result};
use crate::twotower::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdPpConfig {
    pub rank: usize,
    pub reg: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Standard deviation of the Gaussian factor initialization.
    pub init_std: f64,
    pub seed: u64,
}

impl Default for SvdPpConfig {
    fn default() -> Self {
        Self {
            rank: 30,
            reg: 0.02,
            lr: 5e-3,
            epochs: 20,
            init_std: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdPpModel {
    pub rank: usize,
    pub reg: f64,
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// `n x k`
    pub user_factors: Vec<f64>,
    /// `m x k`
    pub item_factors: Vec<f64>,
    /// `m x k` implicit-feedback factors `y_j`.
    pub implicit_factors: Vec<f64>,
    /// Items rated by each user during training.
    pub rated: Vec<Vec<usize>>,
}

impl SvdPpModel {
    /// All-zero parameters over an `n x m` id universe.
    pub fn zeros(n_users: usize, n_items: usize, rank: usize, global_mean: f64) -> Self {
        Self {
            rank,
            reg: 0.0,
            global_mean,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors: vec![0.0; n_users * rank],
            item_factors: vec![0.0; n_items * rank],
            implicit_factors: vec![0.0; n_items * rank],
            rated: vec![Vec::new(); n_users],
        }
    }

    fn factor(m: &[f64], id: usize, k: usize) -> &[f64] {
        &m[id * k..(id + 1) * k]
    }

    /// `p_u + |N(u)|^{-1/2} Σ y_j`.
    fn user_vector(&self, user: usize) -> Vec<f64> {
        let k = self.rank;
        let mut v = Self::factor(&self.user_factors, user, k).to_vec();
        let n = &self.rated[user];
        if !n.is_empty() {
            let w = 1.0 / (n.len() as f64).sqrt();
            for &j in n {
                for (a, y) in v.iter_mut().zip(Self::factor(&self.implicit_factors, j, k)) {
                    *a += w * y;
                }
            }
        }
        v
    }

    fn n_users(&self) -> usize {
        self.user_bias.len()
    }

    fn n_items(&self) -> usize {
        self.item_bias.len()
    }

    /// Sum of squared biases and factors.
    pub fn param_norm_sq(&self) -> f64 {
        self.user_bias
            .iter()
            .chain(&self.item_bias)
            .chain(&self.user_factors)
            .chain(&self.item_factors)
            .chain(&self.implicit_factors)
            .map(|v| v * v)
            .sum()
    }
}

impl Predictor for SvdPpModel {
    fn predict(&self, user: usize, item: usize) -> f64 {
        let mut est = self.global_mean;
        let known_user = user < self.n_users();
        let known_item = item < self.n_items();
        if known_user {
            est += self.user_bias[user];
        }
        if known_item {
            est += self.item_bias[item];
        }
        if known_user && known_item {
            est += dot(
                Self::factor(&self.item_factors, item, self.rank),
                &self.user_vector(user),
            );
        }
        est
    }
}

/// `Σ (r - r̂)^2 + reg · |params|^2` over the training ratings.
pub fn svdpp_objective(model: &SvdPpModel, index: &RatingIndex) -> f64 {
    let sse: f64 = index
        .triples()
        .map(|r| (r.value - model.predict(r.user, r.item)).powi(2))
        .sum();
    sse + model.reg * model.param_norm_sq()
}

pub fn fit_svdpp(index: &RatingIndex, cfg: &SvdPpConfig) -> Result<SvdPpModel> {
    if cfg.rank == 0 {
        return Err(Error::param("rank must be >= 1"));
    }
    if !(cfg.reg >= 0.0 && cfg.lr > 0.0 && cfg.init_std >= 0.0) {
        return Err(Error::param("need reg >= 0, lr > 0, init_std >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, m, k) = (index.n_users(), index.n_items(), cfg.rank);
    let mut model = SvdPpModel::zeros(n, m, k, index.global_mean());
    model.reg = cfg.reg;
    if cfg.init_std > 0.0 {
        let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::param(e.to_string()))?;
        for v in model
            .user_factors
            .iter_mut()
            .chain(model.item_factors.iter_mut())
            .chain(model.implicit_factors.iter_mut())
        {
            *v = normal.sample(&mut rng);
        }
    }
    model.rated = (0..n)
        .map(|u| index.user_ratings(u).iter().map(|e| e.0).collect())
        .collect();

    let mut order: Vec<Rating> = index.triples().collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for r in &order {
            sgd_update(&mut model, r, cfg.lr, cfg.reg);
        }
    }
    Ok(model)
}

fn sgd_update(model: &mut SvdPpModel, r: &Rating, lr: f64, reg: f64) {
    let k = model.rank;
    let (u, i) = (r.user, r.item);
    let implicit = model.user_vector(u);
    let qi: Vec<f64> = SvdPpModel::factor(&model.item_factors, i, k).to_vec();
    let err = r.value - (model.global_mean + model.user_bias[u] + model.item_bias[i] + dot(&qi, &implicit));

    model.user_bias[u] += lr * (err - reg * model.user_bias[u]);
    model.item_bias[i] += lr * (err - reg * model.item_bias[i]);
    for a in 0..k {
        let pu = model.user_factors[u * k + a];
        model.user_factors[u * k + a] += lr * (err * qi[a] - reg * pu);
        model.item_factors[i * k + a] += lr * (err * implicit[a] - reg * qi[a]);
    }
    let rated = &model.rated[u];
    if !rated.is_empty() {
        let w = err / (rated.len() as f64).sqrt();
        for &j in rated {
            for (y, q) in model.implicit_factors[j * k..(j + 1) * k].iter_mut().zip(&qi) {
                *y += lr * (w * q - reg * *y);
            }
        }
    }
}
