//! Classical collaborative-filtering baselines. All of them work from rating
//! triples alone and ignore covariates.

mod cocluster;
mod knn;
mod rsvd;
mod svdpp;

pub use cocluster::{fit_cocluster, fit_cocluster_traced, CoClusterModel};
pub use knn::{fit_knn, KnnMode, KnnModel, KnnPrediction};
pub use rsvd::{fit_rsvd, fit_rsvd_traced, MfModel};
pub use svdpp::{fit_svdpp, svdpp_objective, SvdPpConfig, SvdPpModel};

use crate::data::Rating;
use crate::error::{Error, Result};

/// Anything that can predict a rating for an id pair.
pub trait Predictor {
    fn predict(&self, user: usize, item: usize) -> f64;
}

impl<F: Fn(usize, usize) -> f64> Predictor for F {
    fn predict(&self, user: usize, item: usize) -> f64 {
        self(user, item)
    }
}

/// Ratings grouped per user and per item over the id universe `0..n_users`, `0..n_items`.
#[derive(Debug, Clone)]
pub struct RatingIndex {
    n_users: usize,
    n_items: usize,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
    global_mean: f64,
}

impl RatingIndex {
    pub fn new(ratings: &[Rating], n_users: usize, n_items: usize) -> Result<Self> {
        if ratings.is_empty() {
            return Err(Error::Empty("no ratings to fit".into()));
        }
        let mut by_user = vec![Vec::new(); n_users];
        let mut by_item = vec![Vec::new(); n_items];
        let mut sum = 0.0;
        for r in ratings {
            if r.user >= n_users || r.item >= n_items {
                return Err(Error::dim(format!(
                    "rating ({}, {}) outside the {n_users} x {n_items} id universe",
                    r.user, r.item
                )));
            }
            by_user[r.user].push((r.item, r.value));
            by_item[r.item].push((r.user, r.value));
            sum += r.value;
        }
        by_user.iter_mut().for_each(|v| v.sort_by_key(|e| e.0));
        by_item.iter_mut().for_each(|v| v.sort_by_key(|e| e.0));
        Ok(Self {
            n_users,
            n_items,
            by_user,
            by_item,
            global_mean: sum / ratings.len() as f64,
        })
    }

    /// Id universe taken as `0..=max id` on each side.
    pub fn from_ratings(ratings: &[Rating]) -> Result<Self> {
        let n_users = ratings.iter().map(|r| r.user + 1).max().unwrap_or(0);
        let n_items = ratings.iter().map(|r| r.item + 1).max().unwrap_or(0);
        Self::new(ratings, n_users, n_items)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn user_ratings(&self, user: usize) -> &[(usize, f64)] {
        &self.by_user[user]
    }

    pub fn item_ratings(&self, item: usize) -> &[(usize, f64)] {
        &self.by_item[item]
    }

    pub fn len(&self) -> usize {
        self.by_user.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn triples(&self) -> impl Iterator<Item = Rating> + '_ {
        self.by_user
            .iter()
            .enumerate()
            .flat_map(|(u, v)| v.iter().map(move |&(i, r)| Rating::new(u, i, r)))
    }

    fn user_mean(&self, user: usize) -> Option<f64> {
        mean(self.by_user.get(user)?.iter().map(|e| e.1))
    }

    fn item_mean(&self, item: usize) -> Option<f64> {
        mean(self.by_item.get(item)?.iter().map(|e| e.1))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Hyperparameter-carrying identifier of a baseline method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    Rsvd,
    SvdPp,
    CoCluster,
    Knn,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Rsvd,
        BaselineKind::SvdPp,
        BaselineKind::CoCluster,
        BaselineKind::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Rsvd => "rsvd",
            BaselineKind::SvdPp => "svdpp",
            BaselineKind::CoCluster => "cocluster",
            BaselineKind::Knn => "knn",
        }
    }
}

/// Fixed (non-tuned) settings of the baselines.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSettings {
    pub rank: usize,
    pub als_sweeps: usize,
    pub svdpp_epochs: usize,
    pub svdpp_lr: f64,
    pub cocluster_iters: usize,
    pub knn_mode: KnnMode,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            rank: 30,
            als_sweeps: 30,
            svdpp_epochs: 20,
            svdpp_lr: 5e-3,
            cocluster_iters: 20,
            knn_mode: KnnMode::UserBased,
        }
    }
}

/// Fits `kind` with tuned hyperparameter `hyper` (regularization for the
/// factor models, cluster count for co-clustering, neighbourhood size for KNN).
pub fn fit_baseline(
    kind: BaselineKind,
    index: &RatingIndex,
    hyper: f64,
    settings: &BaselineSettings,
    seed: u64,
) -> Result<Box<dyn Predictor + Send + Sync>> {
    Ok(match kind {
        BaselineKind::Rsvd => Box::new(fit_rsvd(index, settings.rank, hyper, settings.als_sweeps, seed)?),
        BaselineKind::SvdPp => Box::new(fit_svdpp(
            index,
            &SvdPpConfig {
                rank: settings.rank,
                reg: hyper,
                lr: settings.svdpp_lr,
                epochs: settings.svdpp_epochs,
                seed,
                ..SvdPpConfig::default()
            },
        )?),
        BaselineKind::CoCluster => {
            let g = count_hyper(hyper, "cluster count")?;
            Box::new(fit_cocluster(
                index,
                g.min(index.n_users()),
                g.min(index.n_items()),
                settings.cocluster_iters,
                seed,
            )?)
        }
        BaselineKind::Knn => Box::new(fit_knn(index, settings.knn_mode, count_hyper(hyper, "k")?)?),
    })
}

fn count_hyper(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(Error::param(format!("{what} must be a positive integer, got {v}")))
    }
}
